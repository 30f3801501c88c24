//! The eight PMF similarity / divergence measures.
//!
//! Ordinal order of [`MeasureId`] fixes the embedding layout:
//!
//! | slot | measure | kind |
//! |------|---------|------|
//! | 0 | quadratic-chi | distance |
//! | 1 | normalized cross-correlation | similarity |
//! | 2 | Hellinger | distance |
//! | 3 | intersection | similarity |
//! | 4 | Kullback-Leibler | divergence |
//! | 5 | symmetric Kullback-Leibler | divergence |
//! | 6 | Jensen-Shannon | divergence |
//! | 7 | modified Kolmogorov-Smirnov | distance |
//!
//! All logarithms are natural. Sums over bins use compensated summation.
//! Kullback-Leibler style measures are evaluated on whatever PMFs are passed
//! in; callers smooth with [`crate::pmf::smooth_for_divergence`] first (the
//! embedding stage does this).

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{compensated_dot, kahan_sum, KahanSum};
use crate::pmf::{check_epsilon, smooth_bin, Pmf};

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("PMFs have {left} and {right} bins")]
    BinCountMismatch { left: usize, right: usize },
    #[error("PMF mass {sum} deviates from 1 by more than 1e-6")]
    NotNormalized { sum: f64 },
    #[error("{0:?} is unbounded: q has zero mass where p does not (smooth the inputs)")]
    UnboundedDivergence(MeasureId),
    #[error("invalid similarity configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasureId {
    QuadraticChi,
    NormalizedCrossCorrelation,
    Hellinger,
    Intersection,
    KullbackLeibler,
    SymmetricKL,
    JensenShannon,
    ModifiedKolmogorovSmirnov,
}

pub const MEASURE_COUNT: usize = 8;

impl MeasureId {
    pub const ALL: [MeasureId; MEASURE_COUNT] = [
        MeasureId::QuadraticChi,
        MeasureId::NormalizedCrossCorrelation,
        MeasureId::Hellinger,
        MeasureId::Intersection,
        MeasureId::KullbackLeibler,
        MeasureId::SymmetricKL,
        MeasureId::JensenShannon,
        MeasureId::ModifiedKolmogorovSmirnov,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Similarities score 1 on identical inputs; the rest score 0.
    pub fn is_similarity(self) -> bool {
        matches!(self, MeasureId::NormalizedCrossCorrelation | MeasureId::Intersection)
    }

    /// Measures that need strictly positive inputs to stay finite.
    pub fn needs_smoothing(self) -> bool {
        matches!(self, MeasureId::KullbackLeibler | MeasureId::SymmetricKL)
    }

    pub fn name(self) -> &'static str {
        match self {
            MeasureId::QuadraticChi => "quadratic_chi",
            MeasureId::NormalizedCrossCorrelation => "normalized_cross_correlation",
            MeasureId::Hellinger => "hellinger",
            MeasureId::Intersection => "intersection",
            MeasureId::KullbackLeibler => "kullback_leibler",
            MeasureId::SymmetricKL => "symmetric_kl",
            MeasureId::JensenShannon => "jensen_shannon",
            MeasureId::ModifiedKolmogorovSmirnov => "modified_kolmogorov_smirnov",
        }
    }
}

/// Tunables for the quadratic-chi bin-similarity matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityConfig {
    /// Half-width `W` of the banded bin-similarity matrix.
    pub qc_window: usize,
    /// Gaussian width (in bins) of the bin-similarity weights.
    pub qc_sigma: f64,
    /// Normalization exponent `m`.
    pub qc_exponent: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            qc_window: 64,
            qc_sigma: 64.0 / 3.0,
            qc_exponent: 0.9,
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<(), SimilarityError> {
        if !(self.qc_sigma > 0.0 && self.qc_sigma.is_finite()) {
            return Err(SimilarityError::InvalidConfig(format!("qc_sigma {}", self.qc_sigma)));
        }
        if !(0.0..1.0).contains(&self.qc_exponent) {
            return Err(SimilarityError::InvalidConfig(format!(
                "qc_exponent {} outside [0, 1)",
                self.qc_exponent
            )));
        }
        Ok(())
    }

    fn qc_weights(&self) -> Vec<f64> {
        let two_s2 = 2.0 * self.qc_sigma * self.qc_sigma;
        (0..=self.qc_window)
            .map(|d| (-((d * d) as f64) / two_s2).exp())
            .collect()
    }
}

fn check_pair(p: &Pmf, q: &Pmf) -> Result<(), SimilarityError> {
    if p.bin_count() != q.bin_count() {
        return Err(SimilarityError::BinCountMismatch {
            left: p.bin_count(),
            right: q.bin_count(),
        });
    }
    for r in [p, q] {
        let sum = r.total_mass();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(SimilarityError::NotNormalized { sum });
        }
    }
    Ok(())
}

/// `d_l(p, q)` with the default configuration.
pub fn measure(id: MeasureId, p: &Pmf, q: &Pmf) -> Result<f64, SimilarityError> {
    measure_with(id, p, q, &SimilarityConfig::default())
}

pub fn measure_with(
    id: MeasureId,
    p: &Pmf,
    q: &Pmf,
    config: &SimilarityConfig,
) -> Result<f64, SimilarityError> {
    check_pair(p, q)?;
    let r = union(p, q);
    let (a, b) = (p.bins(), q.bins());
    Ok(match id {
        MeasureId::QuadraticChi => quadratic_chi(a, b, r, config),
        MeasureId::NormalizedCrossCorrelation => normalized_cross_correlation(a, b, r),
        MeasureId::Hellinger => hellinger(a, b, r),
        MeasureId::Intersection => intersection(a, b, r),
        MeasureId::KullbackLeibler | MeasureId::SymmetricKL | MeasureId::JensenShannon => {
            divergence(id, a, b, r, |x| x)?
        }
        MeasureId::ModifiedKolmogorovSmirnov => kolmogorov_smirnov(a, b, r),
    })
}

/// All eight measures in ordinal order.
pub fn measure_vector(p: &Pmf, q: &Pmf) -> Result<[f64; MEASURE_COUNT], SimilarityError> {
    measure_vector_with(p, q, &SimilarityConfig::default())
}

pub fn measure_vector_with(
    p: &Pmf,
    q: &Pmf,
    config: &SimilarityConfig,
) -> Result<[f64; MEASURE_COUNT], SimilarityError> {
    let mut out = [0.0; MEASURE_COUNT];
    for id in MeasureId::ALL {
        out[id.ordinal()] = measure_with(id, p, q, config)?;
    }
    Ok(out)
}

/// All eight measures on raw PMFs, with KL and symmetric KL taken on the
/// `epsilon`-smoothed versions. Equals calling [`measure_with`] on
/// [`smooth_for_divergence`](crate::pmf::smooth_for_divergence) outputs for
/// those two, without materializing the dense smoothed vectors.
pub fn measure_vector_smoothed(
    p: &Pmf,
    q: &Pmf,
    epsilon: f64,
    config: &SimilarityConfig,
) -> Result<[f64; MEASURE_COUNT], SimilarityError> {
    let (pp, qp) = (QcPrepared::new(p, config), QcPrepared::new(q, config));
    measure_vector_prepared(p, &pp, q, &qp, epsilon, config)
}

/// [`measure_vector_smoothed`] with the quadratic-chi band sums of both
/// inputs supplied by the caller.
pub fn measure_vector_prepared(
    p: &Pmf,
    pp: &QcPrepared,
    q: &Pmf,
    qp: &QcPrepared,
    epsilon: f64,
    config: &SimilarityConfig,
) -> Result<[f64; MEASURE_COUNT], SimilarityError> {
    check_pair(p, q)?;
    check_epsilon(epsilon).map_err(|e| SimilarityError::InvalidConfig(e.to_string()))?;
    if !(pp.matches(config) && qp.matches(config)) {
        return Err(SimilarityError::InvalidConfig("prepared band sums use another window".into()));
    }
    let floor = epsilon / p.bin_count() as f64;
    let smooth = |x: f64| smooth_bin(x, epsilon, floor);
    let r = union(p, q);
    let (a, b) = (p.bins(), q.bins());
    let mut out = [0.0; MEASURE_COUNT];
    for id in MeasureId::ALL {
        out[id.ordinal()] = match id {
            MeasureId::QuadraticChi => quadratic_chi_prepared(a, pp, b, qp, r.clone(), config),
            MeasureId::NormalizedCrossCorrelation => normalized_cross_correlation(a, b, r.clone()),
            MeasureId::Hellinger => hellinger(a, b, r.clone()),
            MeasureId::Intersection => intersection(a, b, r.clone()),
            MeasureId::KullbackLeibler | MeasureId::SymmetricKL => divergence(id, a, b, r.clone(), smooth)?,
            MeasureId::JensenShannon => divergence(id, a, b, r.clone(), |x| x)?,
            MeasureId::ModifiedKolmogorovSmirnov => kolmogorov_smirnov(a, b, r.clone()),
        };
    }
    Ok(out)
}

/// Bins outside this range are zero in both inputs.
fn union(p: &Pmf, q: &Pmf) -> Range<usize> {
    let (a, b) = (p.support(), q.support());
    a.start.min(b.start)..a.end.max(b.end)
}

/// Bins outside `r` map to equal values under `f` in both inputs, so they
/// add nothing to any of the three divergences.
fn divergence(
    id: MeasureId,
    a: &[f64],
    b: &[f64],
    r: Range<usize>,
    f: impl Fn(f64) -> f64 + Copy,
) -> Result<f64, SimilarityError> {
    let (a, b) = (&a[r.clone()], &b[r]);
    Ok(match id {
        MeasureId::KullbackLeibler => {
            kullback_leibler(a, b, f).ok_or(SimilarityError::UnboundedDivergence(id))?
        }
        MeasureId::SymmetricKL => match (kullback_leibler(a, b, f), kullback_leibler(b, a, f)) {
            (Some(x), Some(y)) => x + y,
            _ => return Err(SimilarityError::UnboundedDivergence(id)),
        },
        _ => jensen_shannon(a, b, f),
    })
}

/// `sum p ln(p/q)`, `None` if some `q_i = 0 < p_i`.
fn kullback_leibler(p: &[f64], q: &[f64], f: impl Fn(f64) -> f64) -> Option<f64> {
    let mut acc = KahanSum::new();
    for (&pi, &qi) in p.iter().zip(q) {
        let (pi, qi) = (f(pi), f(qi));
        // identical bins contribute exactly zero
        if pi == 0.0 || pi == qi {
            continue;
        }
        if qi == 0.0 {
            return None;
        }
        acc.add(pi * (pi / qi).ln());
    }
    Some(acc.value())
}

fn jensen_shannon(p: &[f64], q: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut left = KahanSum::new();
    let mut right = KahanSum::new();
    for (&pi, &qi) in p.iter().zip(q) {
        let (pi, qi) = (f(pi), f(qi));
        if pi == qi {
            continue;
        }
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            left.add(pi * (pi / m).ln());
        }
        if qi > 0.0 {
            right.add(qi * (qi / m).ln());
        }
    }
    (0.5 * left.value() + 0.5 * right.value()).clamp(0.0, std::f64::consts::LN_2)
}

/// `sqrt(1 - BC)`, evaluated as `sqrt(½ Σ (√p - √q)²)`, which agrees for
/// normalized inputs and is exactly zero on identical ones.
fn hellinger(p: &[f64], q: &[f64], r: Range<usize>) -> f64 {
    let s = kahan_sum(p[r.clone()].iter().zip(&q[r]).map(|(&a, &b)| {
        let d = a.sqrt() - b.sqrt();
        d * d
    }));
    (0.5 * s).sqrt().min(1.0)
}

fn intersection(p: &[f64], q: &[f64], r: Range<usize>) -> f64 {
    kahan_sum(p[r.clone()].iter().zip(&q[r]).map(|(&a, &b)| a.min(b)))
}

/// Pearson correlation of the two bin vectors at zero lag.
fn normalized_cross_correlation(p: &[f64], q: &[f64], r: Range<usize>) -> f64 {
    let n = p.len() as f64;
    let (p, q) = (&p[r.clone()], &q[r]);
    let mp = kahan_sum(p.iter().copied()) / n;
    let mq = kahan_sum(q.iter().copied()) / n;
    let mut cross = KahanSum::new();
    let mut vp = KahanSum::new();
    let mut vq = KahanSum::new();
    for (&a, &b) in p.iter().zip(q) {
        let (da, db) = (a - mp, b - mq);
        cross.add(da * db);
        vp.add(da * da);
        vq.add(db * db);
    }
    // bins outside the range are zero in both
    let rest = n - p.len() as f64;
    cross.add(rest * (mp * mq));
    vp.add(rest * mp * mp);
    vq.add(rest * mq * mq);
    let denom = (vp.value() * vq.value()).sqrt();
    if denom == 0.0 {
        // a constant vector has no correlation structure
        return if p == q { 1.0 } else { 0.0 };
    }
    (cross.value() / denom).clamp(-1.0, 1.0)
}

/// Sup-norm of the difference of cumulative sums.
fn kolmogorov_smirnov(p: &[f64], q: &[f64], r: Range<usize>) -> f64 {
    let mut cp = KahanSum::new();
    let mut cq = KahanSum::new();
    let mut best = 0.0f64;
    for (&a, &b) in p[r.clone()].iter().zip(&q[r]) {
        cp.add(a);
        cq.add(b);
        best = best.max((cp.value() - cq.value()).abs());
    }
    // rounding in the running sums can overshoot the bound
    best.min(1.0)
}

/// `K p` for the banded bin-similarity matrix `K`, kept over the support
/// widened by the window. Comparing many inputs against one model reuses it.
#[derive(Debug, Clone, PartialEq)]
pub struct QcPrepared {
    start: usize,
    conv: Vec<f64>,
    window: usize,
    sigma: f64,
}

impl QcPrepared {
    pub fn new(p: &Pmf, config: &SimilarityConfig) -> Self {
        let w = config.qc_window;
        let k = config.qc_weights();
        let r = p.support();
        let start = r.start.saturating_sub(w);
        let end = if r.is_empty() { start } else { (r.end + w).min(p.bin_count()) };
        let mut conv = vec![0.0; end - start];
        for c in r {
            let v = p.bins()[c];
            if v == 0.0 {
                continue;
            }
            let lo = c.saturating_sub(w).max(start);
            let hi = (c + w + 1).min(end);
            for i in lo..hi {
                conv[i - start] += v * k[i.abs_diff(c)];
            }
        }
        Self { start, conv, window: w, sigma: config.qc_sigma }
    }

    #[inline]
    fn at(&self, i: usize) -> f64 {
        i.checked_sub(self.start).and_then(|j| self.conv.get(j)).copied().unwrap_or(0.0)
    }

    fn matches(&self, config: &SimilarityConfig) -> bool {
        self.window == config.qc_window && self.sigma == config.qc_sigma
    }
}

/// Quadratic-chi distance with a banded Gaussian bin-similarity matrix.
fn quadratic_chi(p: &[f64], q: &[f64], r: Range<usize>, config: &SimilarityConfig) -> f64 {
    let pp = QcPrepared::new(&Pmf::from_bins(p.to_vec(), 0).expect("checked pmf"), config);
    let qp = QcPrepared::new(&Pmf::from_bins(q.to_vec(), 0).expect("checked pmf"), config);
    quadratic_chi_prepared(p, &pp, q, &qp, r, config)
}

/// `sqrt(d' K d)` with `d_i = (p_i - q_i) / z_i^m` and `z = K p + K q`.
/// `d` vanishes outside `r`, so the quadratic form is taken one band
/// diagonal at a time over `r` only.
fn quadratic_chi_prepared(
    p: &[f64],
    pp: &QcPrepared,
    q: &[f64],
    qp: &QcPrepared,
    r: Range<usize>,
    config: &SimilarityConfig,
) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    let k = config.qc_weights();
    let d: Vec<f64> = r
        .clone()
        .map(|i| {
            // p_i != q_i implies z_i >= k[0] (p_i + q_i) > 0
            if p[i] != q[i] {
                (p[i] - q[i]) / (pp.at(i) + qp.at(i)).powf(config.qc_exponent)
            } else {
                0.0
            }
        })
        .collect();
    let len = d.len();
    let mut total = KahanSum::new();
    total.add(k[0] * compensated_dot(&d, &d));
    for off in 1..=config.qc_window.min(len - 1) {
        total.add(2.0 * k[off] * compensated_dot(&d[..len - off], &d[off..]));
    }
    total.value().max(0.0).sqrt()
}
