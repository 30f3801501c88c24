//! Tandem detection cost: unconstrained (both thresholds free) and
//! ASV-constrained (ASV threshold fixed, CM threshold swept).
//!
//! CM rates treat target and non-target trials as bona fide positives and
//! spoofs as negatives. The ASV spoof false-accept rate is taken over all
//! spoof trials in the ASV score set.

use serde::{Deserialize, Serialize};

use super::rates::{frac_at_or_above, frac_below, nonempty, sweep_thresholds};
use super::{eer, MetricsError, TandemCostModel, Task, TrialScoreSet};
use crate::labels::{Gender, TrialClass};

/// ASV error rates at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsvRates {
    pub p_miss: f64,
    pub p_fa: f64,
    pub p_fa_spoof: f64,
}

struct AsvCurve {
    tar: Vec<f64>,
    non: Vec<f64>,
    spf: Vec<f64>,
}

impl AsvCurve {
    fn new(asv: &TrialScoreSet) -> Result<Self, MetricsError> {
        let tar = asv.class_scores(TrialClass::Target);
        let non = asv.class_scores(TrialClass::NonTarget);
        let spf = asv.class_scores(TrialClass::Spoof);
        nonempty(&tar, "target")?;
        nonempty(&non, "nontarget")?;
        if spf.is_empty() {
            return Err(MetricsError::MissingSpoofTrials);
        }
        Ok(Self { tar, non, spf })
    }

    fn rates(&self, tau: f64) -> AsvRates {
        AsvRates {
            p_miss: frac_below(&self.tar, tau),
            p_fa: frac_at_or_above(&self.non, tau),
            p_fa_spoof: frac_at_or_above(&self.spf, tau),
        }
    }
}

/// ASV rates at threshold `tau` (targets, non-targets and spoofs of `asv`).
pub fn asv_rates_at(asv: &TrialScoreSet, tau: f64) -> Result<AsvRates, MetricsError> {
    Ok(AsvCurve::new(asv)?.rates(tau))
}

/// ASV rates at the target/non-target EER threshold, plus that threshold.
///
/// The threshold sits just above the highest target or non-target score it
/// rejects (`-inf` if none), so a spoof scoring between two bona fide scores
/// is accepted however the scores are scaled.
pub fn asv_rates_at_eer(asv: &TrialScoreSet) -> Result<(AsvRates, f64), MetricsError> {
    let (_, mid) = eer(asv, Task::Asv)?;
    let (tar, non) = asv.split(Task::Asv);
    let below = tar.iter().chain(&non).copied().filter(|&s| s < mid).fold(f64::NEG_INFINITY, f64::max);
    let tau = if below == f64::NEG_INFINITY { below } else { below.next_up() };
    Ok((asv_rates_at(asv, tau)?, tau))
}

struct CmCurve {
    bona: Vec<f64>,
    spoof: Vec<f64>,
}

impl CmCurve {
    fn new(cm: &TrialScoreSet) -> Result<Self, MetricsError> {
        let (bona, spoof) = cm.split(Task::Cm);
        nonempty(&bona, "bona fide")?;
        if spoof.is_empty() {
            return Err(MetricsError::MissingSpoofTrials);
        }
        Ok(Self { bona, spoof })
    }

    /// `(P_miss^cm, P_fa^cm)` at `tau`.
    fn rates(&self, tau: f64) -> (f64, f64) {
        (frac_below(&self.bona, tau), frac_at_or_above(&self.spoof, tau))
    }

    fn thresholds(&self) -> Vec<f64> {
        sweep_thresholds(self.bona.iter().chain(&self.spoof).copied())
    }
}

#[inline]
fn unconstrained_value(pm_cm: f64, pfa_cm: f64, asv: &AsvRates, c: &TandemCostModel) -> f64 {
    let pa = (1.0 - pm_cm) * asv.p_miss;
    let pb = (1.0 - pm_cm) * asv.p_fa;
    let pc = pfa_cm * asv.p_fa_spoof;
    let pd = pm_cm;
    c.c_miss * c.pi_tar * (pa + pd) + c.c_fa * c.pi_non * pb + c.c_fa_spoof * c.pi_spoof * pc
}

/// Unnormalized t-DCF at `(tau_cm, tau_asv)`.
pub fn tdcf_unconstrained(
    cm: &TrialScoreSet,
    asv: &TrialScoreSet,
    tau_cm: f64,
    tau_asv: f64,
    cost: &TandemCostModel,
) -> Result<f64, MetricsError> {
    cost.validate()?;
    let curve = CmCurve::new(cm)?;
    let rates = asv_rates_at(asv, tau_asv)?;
    let (pm, pf) = curve.rates(tau_cm);
    Ok(unconstrained_value(pm, pf, &rates, cost))
}

/// `min(C_fa pi_non + C_fa,spoof pi_spoof, C_miss pi_tar)`.
pub fn tdcf_unconstrained_default(cost: &TandemCostModel) -> Result<f64, MetricsError> {
    let d = (cost.c_fa * cost.pi_non + cost.c_fa_spoof * cost.pi_spoof).min(cost.c_miss * cost.pi_tar);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(MetricsError::ZeroDefaultCost(d))
    }
}

pub fn tdcf_unconstrained_normalized(
    cm: &TrialScoreSet,
    asv: &TrialScoreSet,
    tau_cm: f64,
    tau_asv: f64,
    cost: &TandemCostModel,
) -> Result<f64, MetricsError> {
    let d = tdcf_unconstrained_default(cost)?;
    Ok(tdcf_unconstrained(cm, asv, tau_cm, tau_asv, cost)? / d)
}

/// A minimum found by a threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdcfMin {
    /// Normalized minimum.
    pub value: f64,
    pub tau_cm: f64,
    /// ASV threshold (fixed for the constrained variant).
    pub tau_asv: f64,
}

/// Evenly thins a sweep to at most `max` points, keeping both ends.
pub(crate) fn thin(mut t: Vec<f64>, max: Option<usize>) -> Vec<f64> {
    match max {
        Some(m) if m >= 2 && t.len() > m => {
            let n = t.len();
            (0..m).map(|k| t[k * (n - 1) / (m - 1)]).collect()
        }
        _ => {
            t.dedup();
            t
        }
    }
}

/// Normalized minimum over the `(tau_cm, tau_asv)` grid. `max_grid` caps the
/// number of thresholds per axis; `None` searches every midpoint.
pub fn min_tdcf_unconstrained(
    cm: &TrialScoreSet,
    asv: &TrialScoreSet,
    cost: &TandemCostModel,
    max_grid: Option<usize>,
) -> Result<TdcfMin, MetricsError> {
    cost.validate()?;
    let d = tdcf_unconstrained_default(cost)?;
    let curve = CmCurve::new(cm)?;
    let asv_curve = AsvCurve::new(asv)?;
    let cm_pts: Vec<(f64, (f64, f64))> = thin(curve.thresholds(), max_grid).into_iter().map(|t| (t, curve.rates(t))).collect();
    let asv_taus = thin(sweep_thresholds(asv.entries.iter().map(|e| e.score)), max_grid);
    let mut best = TdcfMin { value: f64::INFINITY, tau_cm: 0.0, tau_asv: 0.0 };
    for tau_asv in asv_taus {
        let r = asv_curve.rates(tau_asv);
        for &(tau_cm, (pm, pf)) in &cm_pts {
            let v = unconstrained_value(pm, pf, &r, cost) / d;
            if v < best.value {
                best = TdcfMin { value: v, tau_cm, tau_asv };
            }
        }
    }
    Ok(best)
}

/// Which form of the constrained `C1` constant to use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C1Convention {
    /// `pi_tar C_miss - (pi_tar C_miss P_miss^asv + pi_non C_fa P_fa^asv)`, which makes
    /// the constrained form agree term by term with the unconstrained one.
    #[default]
    Consistent,
    /// The same expression with a minus before the false-alarm term.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

pub fn constrained_constants(asv: &AsvRates, cost: &TandemCostModel, convention: C1Convention) -> ConstrainedConstants {
    let miss = cost.pi_tar * cost.c_miss * asv.p_miss;
    let fa = cost.pi_non * cost.c_fa * asv.p_fa;
    let c1 = match convention {
        C1Convention::Consistent => cost.pi_tar * cost.c_miss - (miss + fa),
        C1Convention::AsPrinted => cost.pi_tar * cost.c_miss - (miss - fa),
    };
    ConstrainedConstants {
        c0: miss + fa,
        c1,
        c2: cost.pi_spoof * cost.c_fa_spoof * asv.p_fa_spoof,
    }
}

fn checked_constants(asv: &AsvRates, cost: &TandemCostModel, convention: C1Convention) -> Result<ConstrainedConstants, MetricsError> {
    cost.validate()?;
    let k = constrained_constants(asv, cost, convention);
    if k.c1 < 0.0 {
        return Err(MetricsError::NegativeC1(k.c1));
    }
    Ok(k)
}

/// `C0 + C1 P_miss^cm(tau_cm) + C2 P_fa^cm(tau_cm)`.
pub fn tdcf_asv_constrained(
    cm: &TrialScoreSet,
    asv: &AsvRates,
    tau_cm: f64,
    cost: &TandemCostModel,
    convention: C1Convention,
) -> Result<f64, MetricsError> {
    let k = checked_constants(asv, cost, convention)?;
    let (pm, pf) = CmCurve::new(cm)?.rates(tau_cm);
    Ok(k.c0 + k.c1 * pm + k.c2 * pf)
}

fn constrained_default(k: &ConstrainedConstants) -> Result<f64, MetricsError> {
    let d = k.c0 + k.c1.min(k.c2);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(MetricsError::ZeroDefaultCost(d))
    }
}

/// Divided by the default-system cost `C0 + min(C1, C2)`.
pub fn tdcf_asv_constrained_normalized(
    cm: &TrialScoreSet,
    asv: &AsvRates,
    tau_cm: f64,
    cost: &TandemCostModel,
    convention: C1Convention,
) -> Result<f64, MetricsError> {
    let k = checked_constants(asv, cost, convention)?;
    Ok(tdcf_asv_constrained(cm, asv, tau_cm, cost, convention)? / constrained_default(&k)?)
}

/// Normalized minimum over the CM threshold sweep.
pub fn min_tdcf_constrained(
    cm: &TrialScoreSet,
    asv: &AsvRates,
    cost: &TandemCostModel,
    convention: C1Convention,
) -> Result<TdcfMin, MetricsError> {
    let k = checked_constants(asv, cost, convention)?;
    let d = constrained_default(&k)?;
    let curve = CmCurve::new(cm)?;
    let mut best = TdcfMin { value: f64::INFINITY, tau_cm: 0.0, tau_asv: f64::NAN };
    for tau in curve.thresholds() {
        let (pm, pf) = curve.rates(tau);
        let v = (k.c0 + k.c1 * pm + k.c2 * pf) / d;
        if v < best.value {
            best = TdcfMin { value: v, tau_cm: tau, tau_asv: f64::NAN };
        }
    }
    Ok(best)
}

/// Pooled constrained minimum with a separate CM threshold per gender.
///
/// The pooled CM rates are trial-weighted averages of the per-gender rates,
/// so the cost is a sum of per-gender terms and each threshold is minimized
/// on its own. Returns the normalized minimum and the per-gender thresholds.
pub fn min_tdcf_constrained_by_group(
    cm: &TrialScoreSet,
    asv: &AsvRates,
    cost: &TandemCostModel,
    convention: C1Convention,
) -> Result<(f64, Vec<(Gender, f64)>), MetricsError> {
    let k = checked_constants(asv, cost, convention)?;
    let d = constrained_default(&k)?;
    let (bona, spoof) = cm.split(Task::Cm);
    nonempty(&bona, "bona fide")?;
    if spoof.is_empty() {
        return Err(MetricsError::MissingSpoofTrials);
    }
    let (n_bona, n_spoof) = (bona.len() as f64, spoof.len() as f64);
    let mut total = k.c0;
    let mut taus = Vec::new();
    for g in [Gender::Male, Gender::Female, Gender::Unknown] {
        let part = cm.filter_gender(g);
        if part.is_empty() {
            continue;
        }
        let (b, s) = part.split(Task::Cm);
        let (wb, ws) = (b.len() as f64 / n_bona, s.len() as f64 / n_spoof);
        let mut best = (f64::INFINITY, 0.0);
        for tau in sweep_thresholds(b.iter().chain(&s).copied()) {
            let pm = if b.is_empty() { 0.0 } else { frac_below(&b, tau) };
            let pf = if s.is_empty() { 0.0 } else { frac_at_or_above(&s, tau) };
            let v = k.c1 * wb * pm + k.c2 * ws * pf;
            if v < best.0 {
                best = (v, tau);
            }
        }
        total += best.0;
        taus.push((g, best.1));
    }
    Ok((total / d, taus))
}
