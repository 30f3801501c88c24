//! a-DCF over tandem-gated scores.
//!
//! A trial whose CM score falls below `tau_cm` gets the score `-inf` and is
//! rejected at every ASV threshold. The remaining trials keep their ASV score.

use super::rates::nonempty;
use super::tdcf::thin;
use super::{MetricsError, TandemCostModel, TandemScoreSet};
use crate::labels::TrialClass;
use crate::numeric::separating_midpoint;

/// Gated score of every trial, in input order.
pub fn gate(tandem: &TandemScoreSet, tau_cm: f64) -> Vec<(TrialClass, f64)> {
    tandem
        .entries
        .iter()
        .map(|e| (e.class, if e.s_cm >= tau_cm { e.s_asv } else { f64::NEG_INFINITY }))
        .collect()
}

struct Gated {
    tar: Vec<f64>,
    non: Vec<f64>,
    spf: Vec<f64>,
}

impl Gated {
    fn new(tandem: &TandemScoreSet, tau_cm: f64) -> Result<Self, MetricsError> {
        let mut g = Gated { tar: Vec::new(), non: Vec::new(), spf: Vec::new() };
        for (class, s) in gate(tandem, tau_cm) {
            match class {
                TrialClass::Target => g.tar.push(s),
                TrialClass::NonTarget => g.non.push(s),
                TrialClass::Spoof => g.spf.push(s),
            }
        }
        nonempty(&g.tar, "target")?;
        nonempty(&g.non, "nontarget")?;
        if g.spf.is_empty() {
            return Err(MetricsError::MissingSpoofTrials);
        }
        for v in [&mut g.tar, &mut g.non, &mut g.spf] {
            v.sort_by(f64::total_cmp);
        }
        Ok(g)
    }

    /// Trials rejected at `tau`: gated ones and finite scores below `tau`.
    fn rejected(v: &[f64], tau: f64) -> usize {
        let gated = v.partition_point(|s| *s == f64::NEG_INFINITY);
        gated.max(v.partition_point(|&s| s < tau))
    }

    /// Fraction accepted at `tau`.
    fn accepted(v: &[f64], tau: f64) -> f64 {
        (v.len() - Self::rejected(v, tau)) as f64 / v.len() as f64
    }

    fn cost(&self, tau: f64, c: &TandemCostModel) -> f64 {
        let p_miss = Self::rejected(&self.tar, tau) as f64 / self.tar.len() as f64;
        let p_fa_non = Self::accepted(&self.non, tau);
        let p_fa_spf = Self::accepted(&self.spf, tau);
        c.c_miss * c.pi_tar * p_miss + c.c_fa * c.pi_non * p_fa_non + c.c_fa_spoof * c.pi_spoof * p_fa_spf
    }

    /// Lowest finite score, midpoints between distinct finite scores, and `+inf`.
    fn thresholds(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.tar.iter().chain(&self.non).chain(&self.spf).copied().filter(|s| s.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        let mut out = Vec::with_capacity(v.len() + 1);
        if let Some(&first) = v.first() {
            out.push(first);
        }
        out.extend(v.windows(2).map(|w| separating_midpoint(w[0], w[1])));
        out.push(f64::INFINITY);
        out
    }
}

/// Unnormalized a-DCF at `(tau_cm, tau)`.
pub fn adcf(tandem: &TandemScoreSet, tau_cm: f64, tau: f64, cost: &TandemCostModel) -> Result<f64, MetricsError> {
    cost.validate()?;
    Ok(Gated::new(tandem, tau_cm)?.cost(tau, cost))
}

/// `min(C_miss pi_tar, C_fa pi_non + C_fa,spoof pi_spoof)`.
pub fn adcf_default(cost: &TandemCostModel) -> Result<f64, MetricsError> {
    super::tdcf_unconstrained_default(cost)
}

pub fn adcf_normalized(tandem: &TandemScoreSet, tau_cm: f64, tau: f64, cost: &TandemCostModel) -> Result<f64, MetricsError> {
    Ok(adcf(tandem, tau_cm, tau, cost)? / adcf_default(cost)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcfMin {
    /// Normalized minimum.
    pub value: f64,
    pub tau_cm: f64,
    pub tau: f64,
}

/// Normalized minimum over ASV thresholds for a fixed CM threshold.
pub fn min_adcf_at(tandem: &TandemScoreSet, tau_cm: f64, cost: &TandemCostModel) -> Result<AdcfMin, MetricsError> {
    cost.validate()?;
    let d = adcf_default(cost)?;
    let g = Gated::new(tandem, tau_cm)?;
    let mut best = AdcfMin { value: f64::INFINITY, tau_cm, tau: f64::INFINITY };
    for tau in g.thresholds() {
        let v = g.cost(tau, cost) / d;
        if v < best.value {
            best = AdcfMin { value: v, tau_cm, tau };
        }
    }
    Ok(best)
}

/// Normalized minimum over both thresholds; `max_grid` caps the CM sweep.
pub fn min_adcf_joint(tandem: &TandemScoreSet, cost: &TandemCostModel, max_grid: Option<usize>) -> Result<AdcfMin, MetricsError> {
    let taus = thin(super::sweep_thresholds(tandem.entries.iter().map(|e| e.s_cm)), max_grid);
    let mut best: Option<AdcfMin> = None;
    for tau_cm in taus {
        let m = min_adcf_at(tandem, tau_cm, cost)?;
        if best.is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    Ok(best.expect("sweep is never empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Gender;
    use crate::labels::TrialClass::{NonTarget, Spoof, Target};
    use crate::metrics::TandemEntry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tandem(rng: &mut ChaCha8Rng, n: usize) -> TandemScoreSet {
        let entries = (0..n)
            .map(|i| {
                let class = [Target, NonTarget, Spoof][i % 3];
                let (mc, ma) = match class {
                    Target => (1.0, 1.0),
                    NonTarget => (1.0, -1.0),
                    Spoof => (-1.0, 0.6),
                };
                TandemEntry {
                    trial_id: format!("t{i}"),
                    gender: Gender::Unknown,
                    class,
                    s_cm: mc + rng.random_range(-1.5..1.5),
                    s_asv: ma + rng.random_range(-1.5..1.5),
                }
            })
            .collect();
        TandemScoreSet::new(entries).unwrap()
    }

    fn brute(t: &TandemScoreSet, c: &TandemCostModel) -> f64 {
        let mut cms: Vec<f64> = t.entries.iter().map(|e| e.s_cm).collect();
        cms.extend([f64::NEG_INFINITY, f64::INFINITY]);
        let mut asvs: Vec<f64> = t.entries.iter().map(|e| e.s_asv).collect();
        asvs.push(f64::INFINITY);
        let mut best = f64::INFINITY;
        for &tcm in &cms {
            for &tau in &asvs {
                let mut miss = (0.0, 0.0);
                let mut fa_non = (0.0, 0.0);
                let mut fa_spf = (0.0, 0.0);
                for e in &t.entries {
                    let accepted = e.s_cm >= tcm && e.s_asv >= tau;
                    match e.class {
                        Target => miss = (miss.0 + f64::from(!accepted as u8), miss.1 + 1.0),
                        NonTarget => fa_non = (fa_non.0 + f64::from(accepted as u8), fa_non.1 + 1.0),
                        Spoof => fa_spf = (fa_spf.0 + f64::from(accepted as u8), fa_spf.1 + 1.0),
                    }
                }
                let v = c.c_miss * c.pi_tar * miss.0 / miss.1
                    + c.c_fa * c.pi_non * fa_non.0 / fa_non.1
                    + c.c_fa_spoof * c.pi_spoof * fa_spf.0 / fa_spf.1;
                best = best.min(v);
            }
        }
        best / adcf_default(c).unwrap()
    }

    #[test]
    fn joint_min_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = TandemCostModel::default();
        for _ in 0..20 {
            let t = random_tandem(&mut rng, 30);
            let m = min_adcf_joint(&t, &c, None).unwrap();
            assert!((m.value - brute(&t, &c)).abs() < 1e-12);
        }
    }

    #[test]
    fn open_gate_is_asv_only_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = TandemCostModel::default();
        let t = random_tandem(&mut rng, 30);
        for e in &t.entries {
            let tau = e.s_asv;
            let ungated: f64 = {
                let frac = |cls, acc: bool| {
                    let sel: Vec<_> = t.entries.iter().filter(|x| x.class == cls).collect();
                    sel.iter().filter(|x| (x.s_asv >= tau) == acc).count() as f64 / sel.len() as f64
                };
                c.c_miss * c.pi_tar * frac(Target, false) + c.c_fa * c.pi_non * frac(NonTarget, true) + c.c_fa_spoof * c.pi_spoof * frac(Spoof, true)
            };
            assert_eq!(adcf(&t, f64::NEG_INFINITY, tau, &c).unwrap(), ungated);
        }
    }

    #[test]
    fn closed_gate_costs_c_miss_pi_tar() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = TandemCostModel::default();
        let t = random_tandem(&mut rng, 15);
        for tau in [-10.0, 0.0, 10.0] {
            assert!((adcf(&t, f64::INFINITY, tau, &c).unwrap() - c.c_miss * c.pi_tar).abs() < 1e-15);
        }
        let m = min_adcf_at(&t, f64::INFINITY, &c).unwrap();
        assert!((m.value - c.c_miss * c.pi_tar / adcf_default(&c).unwrap()).abs() < 1e-15);
    }
}
