//! Miss and false-alarm rates, EER and the prior-weighted DCF.

use super::{MetricsError, TandemCostModel, Task, TrialScoreSet};
use crate::numeric::separating_midpoint;

/// Ascending sweep: `-inf`, midpoints between consecutive distinct scores, `+inf`.
pub fn sweep_thresholds(scores: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = scores.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mut out = Vec::with_capacity(v.len() + 1);
    out.push(f64::NEG_INFINITY);
    out.extend(v.windows(2).map(|w| separating_midpoint(w[0], w[1])));
    out.push(f64::INFINITY);
    out
}

/// Fraction of `sorted` strictly below `tau`.
#[inline]
pub(crate) fn frac_below(sorted: &[f64], tau: f64) -> f64 {
    sorted.partition_point(|&s| s < tau) as f64 / sorted.len() as f64
}

/// Fraction of `sorted` at or above `tau`.
#[inline]
pub(crate) fn frac_at_or_above(sorted: &[f64], tau: f64) -> f64 {
    (sorted.len() - sorted.partition_point(|&s| s < tau)) as f64 / sorted.len() as f64
}

pub(crate) fn nonempty(v: &[f64], name: &str) -> Result<(), MetricsError> {
    if v.is_empty() {
        Err(MetricsError::EmptyClass(name.to_string()))
    } else {
        Ok(())
    }
}

fn split_checked(set: &TrialScoreSet, task: Task) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    let (pos, neg) = set.split(task);
    let (pn, nn) = task.names();
    nonempty(&pos, pn)?;
    nonempty(&neg, nn)?;
    Ok((pos, neg))
}

/// `(p_miss, p_fa)` at `tau`: positives below `tau` and negatives at or above it.
pub fn error_rates(set: &TrialScoreSet, tau: f64, task: Task) -> Result<(f64, f64), MetricsError> {
    let (pos, neg) = split_checked(set, task)?;
    Ok((frac_below(&pos, tau), frac_at_or_above(&neg, tau)))
}

/// EER and its threshold from raw positive and negative scores.
pub fn eer_from_scores(pos: &[f64], neg: &[f64]) -> Result<(f64, f64), MetricsError> {
    nonempty(pos, "positive")?;
    nonempty(neg, "negative")?;
    let mut p = pos.to_vec();
    let mut n = neg.to_vec();
    p.sort_by(f64::total_cmp);
    n.sort_by(f64::total_cmp);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for tau in sweep_thresholds(p.iter().chain(&n).copied()) {
        let pm = frac_below(&p, tau);
        let pf = frac_at_or_above(&n, tau);
        let gap = (pm - pf).abs();
        if gap < best.0 {
            best = (gap, 0.5 * (pm + pf), tau);
        }
    }
    Ok((best.1, best.2))
}

/// EER of a score set for the given task; returns `(eer, tau_at_eer)`.
pub fn eer(set: &TrialScoreSet, task: Task) -> Result<(f64, f64), MetricsError> {
    let (pos, neg) = split_checked(set, task)?;
    eer_from_scores(&pos, &neg)
}

#[inline]
fn dcf_value(pm: f64, pf: f64, cost: &TandemCostModel) -> f64 {
    cost.c_miss * cost.pi_tar * pm + cost.c_fa * (1.0 - cost.pi_tar) * pf
}

/// `C_miss pi_tar P_miss + C_fa (1 - pi_tar) P_fa` on targets vs non-targets.
pub fn dcf(set: &TrialScoreSet, tau: f64, cost: &TandemCostModel) -> Result<f64, MetricsError> {
    let (pm, pf) = error_rates(set, tau, Task::Asv)?;
    Ok(dcf_value(pm, pf, cost))
}

/// Minimum DCF over the threshold sweep; returns `(min_dcf, tau)`.
pub fn min_dcf(set: &TrialScoreSet, cost: &TandemCostModel) -> Result<(f64, f64), MetricsError> {
    let (pos, neg) = split_checked(set, Task::Asv)?;
    let mut best = (f64::INFINITY, 0.0);
    for tau in sweep_thresholds(pos.iter().chain(&neg).copied()) {
        let v = dcf_value(frac_below(&pos, tau), frac_at_or_above(&neg, tau), cost);
        if v < best.0 {
            best = (v, tau);
        }
    }
    Ok(best)
}
