//! One-class softmax loss over cosine scores.

use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::numeric::{sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcSoftmaxParams {
    pub alpha: f64,
    pub m_target: f64,
    pub m_other: f64,
}

impl Default for OcSoftmaxParams {
    fn default() -> Self {
        Self {
            alpha: 20.0,
            m_target: 0.9,
            m_other: 0.2,
        }
    }
}

impl OcSoftmaxParams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let ok = self.alpha > 0.0
            && (-1.0..=1.0).contains(&self.m_target)
            && (-1.0..=1.0).contains(&self.m_other)
            && self.m_other < self.m_target;
        if ok {
            Ok(())
        } else {
            Err(ClassifierError::BadMargins)
        }
    }

    /// Softplus argument for one sample: bona fide scores are pushed above
    /// `m_target`, spoof scores below `m_other`.
    #[inline]
    pub(crate) fn margin_term(&self, score: f64, label: u8) -> f64 {
        if label == 1 {
            self.alpha * (self.m_target - score)
        } else {
            self.alpha * (score - self.m_other)
        }
    }
}

/// Mean loss and its gradient with respect to each score.
pub fn oc_softmax_loss(
    scores: &[f64],
    labels: &[u8],
    params: &OcSoftmaxParams,
) -> Result<(f64, Vec<f64>), ClassifierError> {
    params.validate()?;
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(ClassifierError::InvalidParameter("scores and labels must be non-empty and paired".into()));
    }
    let n = scores.len() as f64;
    let mut loss = 0.0;
    let grad = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let z = params.margin_term(s, y);
            loss += softplus(z);
            let dz = if y == 1 { -params.alpha } else { params.alpha };
            sigmoid(z) * dz / n
        })
        .collect();
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bona_fide_at_one() {
        let (l, _) = oc_softmax_loss(&[1.0], &[1], &OcSoftmaxParams::default()).unwrap();
        assert!((l - softplus(-2.0)).abs() < 1e-15);
        assert!((l - 0.1269).abs() < 1e-4);
    }

    #[test]
    fn spoof_on_margin_is_ln2() {
        let p = OcSoftmaxParams::default();
        let (l, _) = oc_softmax_loss(&[p.m_other], &[0], &p).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn loss_falls_as_bona_fide_score_rises() {
        let p = OcSoftmaxParams::default();
        let mut last = f64::INFINITY;
        for k in 0..=20 {
            let s = p.m_target - 0.1 + 0.01 * k as f64;
            let (l, _) = oc_softmax_loss(&[s], &[1], &p).unwrap();
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn margins_are_checked() {
        let bad = OcSoftmaxParams { m_target: 0.1, m_other: 0.5, ..OcSoftmaxParams::default() };
        assert!(matches!(oc_softmax_loss(&[0.0], &[1], &bad), Err(ClassifierError::BadMargins)));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = OcSoftmaxParams::default();
        let scores: Vec<f64> = (0..24).map(|i| -0.95 + 0.08 * i as f64).collect();
        let labels: Vec<u8> = (0..24).map(|i| (i % 3 != 0) as u8).collect();
        let (loss, grad) = oc_softmax_loss(&scores, &labels, &p).unwrap();
        let h = 1e-6;
        for k in 0..scores.len() {
            let mut up = scores.clone();
            let mut down = scores.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (oc_softmax_loss(&up, &labels, &p).unwrap().0 - oc_softmax_loss(&down, &labels, &p).unwrap().0) / (2.0 * h);
            // roundoff floor of a central difference
            let noise = 4.0 * f64::EPSILON * loss.abs() / h;
            let diff = (fd - grad[k]).abs();
            assert!(diff <= 1e-4 * fd.abs().max(grad[k].abs()) + noise, "score {k}: {fd} vs {}", grad[k]);
        }
    }
}
