//! Detection metrics: EER, DCF, t-DCF (unconstrained and ASV-constrained),
//! a-DCF over tandem-gated scores, and bootstrap confidence intervals.
//!
//! A trial is accepted when its score is `>= tau`. Threshold sweeps run over
//! midpoints between consecutive distinct scores plus the two infinities.

pub mod adcf;
pub mod bootstrap;
pub mod rates;
pub mod scores;
pub mod tdcf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::TrialClass;

pub use adcf::{adcf, adcf_default, adcf_normalized, gate, min_adcf_at, min_adcf_joint, AdcfMin};
pub use bootstrap::{bootstrap_ci, percentile_bounds, BootstrapConfig, MetricEstimate, Resample};
pub use rates::{dcf, eer, eer_from_scores, error_rates, min_dcf, sweep_thresholds};
pub use scores::{join_tandem, TandemEntry, TandemScoreSet, TrialEntry, TrialScoreSet};
pub use tdcf::{
    asv_rates_at, asv_rates_at_eer, constrained_constants, min_tdcf_constrained, min_tdcf_constrained_by_group,
    min_tdcf_unconstrained, tdcf_asv_constrained, tdcf_asv_constrained_normalized, tdcf_unconstrained,
    tdcf_unconstrained_default, tdcf_unconstrained_normalized, AsvRates, C1Convention, ConstrainedConstants, TdcfMin,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no {0} trials")]
    EmptyClass(String),
    #[error("no spoof trials: t-DCF and a-DCF need them")]
    MissingSpoofTrials,
    #[error("default-system cost is {0}; it must be > 0 to normalize")]
    ZeroDefaultCost(f64),
    #[error("C1 = {0} is negative: the ASV operating point is degenerate")]
    NegativeC1(f64),
    #[error("trial {0} is not present in both score sets")]
    UnpairedTrials(String),
    #[error("invalid cost model: {0}")]
    BadCostModel(String),
    #[error("non-finite score for trial {0}")]
    NonFiniteScore(String),
    #[error("invalid bootstrap configuration: {0}")]
    BadBootstrap(String),
    #[error("statistic undefined on bootstrap resample {iteration}: {reason}")]
    StatisticUndefinedOnResample { iteration: usize, reason: String },
    #[error("{path}:{line}: {reason}")]
    Parse { path: String, line: usize, reason: String },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

/// Which classes count as positives and negatives for a two-class rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Targets vs non-targets.
    Asv,
    /// Bona fide (targets and non-targets) vs spoofs.
    Cm,
    /// Targets vs spoofs.
    AsvSpoof,
}

impl Task {
    pub fn is_positive(self, c: TrialClass) -> bool {
        match self {
            Task::Asv | Task::AsvSpoof => c == TrialClass::Target,
            Task::Cm => c.is_bonafide(),
        }
    }

    pub fn is_negative(self, c: TrialClass) -> bool {
        match self {
            Task::Asv => c == TrialClass::NonTarget,
            Task::Cm | Task::AsvSpoof => c == TrialClass::Spoof,
        }
    }

    pub fn names(self) -> (&'static str, &'static str) {
        match self {
            Task::Asv => ("target", "nontarget"),
            Task::Cm => ("bona fide", "spoof"),
            Task::AsvSpoof => ("target", "spoof"),
        }
    }
}

/// Priors and costs shared by DCF, t-DCF and a-DCF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TandemCostModel {
    pub pi_tar: f64,
    pub pi_non: f64,
    pub pi_spoof: f64,
    pub c_miss: f64,
    pub c_fa: f64,
    pub c_fa_spoof: f64,
}

impl Default for TandemCostModel {
    /// ASVspoof 2019 t-DCF parameters.
    fn default() -> Self {
        Self {
            pi_tar: 0.9405,
            pi_non: 0.0095,
            pi_spoof: 0.05,
            c_miss: 1.0,
            c_fa: 10.0,
            c_fa_spoof: 10.0,
        }
    }
}

impl TandemCostModel {
    /// Genuine-only ASV reporting: `pi_tar = 0.99`, unit costs, no spoofs.
    pub fn asv_only() -> Self {
        Self {
            pi_tar: 0.99,
            pi_non: 0.01,
            pi_spoof: 0.0,
            c_miss: 1.0,
            c_fa: 1.0,
            c_fa_spoof: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let priors = [self.pi_tar, self.pi_non, self.pi_spoof];
        let costs = [self.c_miss, self.c_fa, self.c_fa_spoof];
        if priors.iter().chain(&costs).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MetricsError::BadCostModel("priors and costs must be finite and >= 0".into()));
        }
        let sum: f64 = priors.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MetricsError::BadCostModel(format!("priors sum to {sum}, not 1")));
        }
        if costs.iter().all(|&c| c == 0.0) {
            return Err(MetricsError::BadCostModel("all costs are zero".into()));
        }
        Ok(())
    }
}
