//! Percentile bootstrap confidence intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MetricsError, TandemScoreSet, TrialScoreSet};
use crate::labels::TrialClass;

/// A data set that can be resampled with replacement.
pub trait Resample: Sized {
    /// Index groups to resample independently. Every index appears once.
    fn strata(&self) -> Vec<Vec<usize>>;
    fn select(&self, idx: &[usize]) -> Self;
    fn size(&self) -> usize;
}

fn by_class(classes: impl Iterator<Item = TrialClass>) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); 3];
    for (i, c) in classes.enumerate() {
        out[TrialClass::ALL.iter().position(|x| *x == c).unwrap()].push(i);
    }
    out.retain(|v| !v.is_empty());
    out
}

impl Resample for TrialScoreSet {
    fn strata(&self) -> Vec<Vec<usize>> {
        by_class(self.entries.iter().map(|e| e.class))
    }
    fn select(&self, idx: &[usize]) -> Self {
        Self { entries: idx.iter().map(|&i| self.entries[i].clone()).collect() }
    }
    fn size(&self) -> usize {
        self.entries.len()
    }
}

impl Resample for TandemScoreSet {
    fn strata(&self) -> Vec<Vec<usize>> {
        by_class(self.entries.iter().map(|e| e.class))
    }
    fn select(&self, idx: &[usize]) -> Self {
        Self { entries: idx.iter().map(|&i| self.entries[i].clone()).collect() }
    }
    fn size(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub m: usize,
    pub alpha_percent: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { m: 1000, alpha_percent: 5.0, seed: 0, stratified: true }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.m < 100 {
            return Err(MetricsError::BadBootstrap(format!("m = {} < 100", self.m)));
        }
        if !(self.alpha_percent > 0.0 && self.alpha_percent < 100.0) {
            return Err(MetricsError::BadBootstrap(format!("alpha_percent = {} outside (0, 100)", self.alpha_percent)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricEstimate {
    pub value: f64,
    /// `min(value, percentile_low)`.
    pub ci_low: f64,
    /// `max(value, percentile_high)`.
    pub ci_high: f64,
    pub n_bootstrap: usize,
    pub alpha_percent: f64,
    /// Raw order statistics before the interval is widened to hold `value`.
    pub percentile_low: f64,
    pub percentile_high: f64,
}

/// Order statistics `k` and `m + 1 - k` (1-based) of `sorted`, with
/// `k = ceil(m alpha / 200)`. For `m = 1000, alpha = 5` these are the 25th
/// and 976th values.
pub fn percentile_bounds(sorted: &[f64], alpha_percent: f64) -> (f64, f64) {
    let m = sorted.len();
    assert!(m > 0, "no bootstrap values");
    let k = ((m as f64 * alpha_percent / 200.0).ceil() as usize).clamp(1, m.div_ceil(2));
    (sorted[k - 1], sorted[m - k])
}

fn draw<T: Resample>(data: &T, strata: &[Vec<usize>], seed: u64, iteration: usize) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    let mut idx = Vec::with_capacity(data.size());
    for s in strata {
        idx.extend((0..s.len()).map(|_| s[rng.random_range(0..s.len())]));
    }
    data.select(&idx)
}

/// Point value on `data` and a percentile interval over `cfg.m` resamples.
/// Iteration `i` draws from its own stream of a generator seeded with
/// `cfg.seed`, so the result does not depend on thread scheduling.
pub fn bootstrap_ci<T, F>(data: &T, statistic: F, cfg: &BootstrapConfig) -> Result<MetricEstimate, MetricsError>
where
    T: Resample + Sync,
    F: Fn(&T) -> Result<f64, MetricsError> + Sync,
{
    cfg.validate()?;
    let value = statistic(data)?;
    let strata = if cfg.stratified { data.strata() } else { vec![(0..data.size()).collect()] };
    let mut values = (0..cfg.m)
        .into_par_iter()
        .map(|i| {
            statistic(&draw(data, &strata, cfg.seed, i))
                .map_err(|e| MetricsError::StatisticUndefinedOnResample { iteration: i, reason: e.to_string() })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    values.sort_by(f64::total_cmp);
    let (lo, hi) = percentile_bounds(&values, cfg.alpha_percent);
    Ok(MetricEstimate {
        value,
        ci_low: lo.min(value),
        ci_high: hi.max(value),
        n_bootstrap: cfg.m,
        alpha_percent: cfg.alpha_percent,
        percentile_low: lo,
        percentile_high: hi,
    })
}
