//! Score-level fusion of two countermeasure streams.
//!
//! Both streams are mapped to [0, 1] first. Weighted fusion is the convex
//! combination `alpha s_gd + (1 - alpha) s_lfcc`; classifier fusion trains a
//! logistic regression or a boosted tree ensemble on the score pair.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{
    train_gbdt, train_logreg, ClassifierError, Dataset, FeatureLayout, GbdtParams, LogregParams, Sample, TrainedModel,
};
use crate::labels::{Gender, TrialClass};
use crate::metrics::{eer, join_tandem, MetricsError, Task, TrialEntry, TrialScoreSet};

const RANGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("score {score} is outside the declared {range:?} range")]
    OutOfDeclaredRange { score: f64, range: ScoreRange },
    #[error("alpha = {0} is outside [0, 1]")]
    BadAlpha(f64),
    #[error("grid step {0} is outside (0, 0.5]")]
    BadGridStep(f64),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Native range of a score stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreRange {
    Unit,
    Symmetric,
}

/// Maps a score to [0, 1]. Values within 1e-9 of the range are clamped.
pub fn map_to_unit(score: f64, range: ScoreRange) -> Result<f64, FusionError> {
    let (lo, hi) = match range {
        ScoreRange::Unit => (0.0, 1.0),
        ScoreRange::Symmetric => (-1.0, 1.0),
    };
    if !(score >= lo - RANGE_TOLERANCE && score <= hi + RANGE_TOLERANCE) {
        return Err(FusionError::OutOfDeclaredRange { score, range });
    }
    let s = score.clamp(lo, hi);
    Ok(match range {
        ScoreRange::Unit => s,
        ScoreRange::Symmetric => (s + 1.0) / 2.0,
    })
}

pub fn map_set_to_unit(set: &TrialScoreSet, range: ScoreRange) -> Result<TrialScoreSet, FusionError> {
    let entries = set
        .entries
        .iter()
        .map(|e| Ok(TrialEntry { score: map_to_unit(e.score, range)?, ..e.clone() }))
        .collect::<Result<_, FusionError>>()?;
    Ok(TrialScoreSet { entries })
}

fn check_alpha(alpha: f64) -> Result<(), FusionError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(FusionError::BadAlpha(alpha))
    }
}

/// `alpha s_gd + (1 - alpha) s_lfcc`.
pub fn fuse_weighted(s_gd: f64, s_lfcc: f64, alpha: f64) -> Result<f64, FusionError> {
    check_alpha(alpha)?;
    Ok(alpha * s_gd + (1.0 - alpha) * s_lfcc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedTrial {
    pub trial_id: String,
    pub gender: Gender,
    pub class: TrialClass,
    pub gd: f64,
    pub lfcc: f64,
}

/// Two unit-mapped streams joined on trial id, in the order of `gd`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairedScores {
    pub trials: Vec<PairedTrial>,
}

impl PairedScores {
    pub fn join(gd: &TrialScoreSet, lfcc: &TrialScoreSet) -> Result<Self, FusionError> {
        let t = join_tandem(gd, lfcc)?;
        Ok(Self {
            trials: t
                .entries
                .into_iter()
                .map(|e| PairedTrial { trial_id: e.trial_id, gender: e.gender, class: e.class, gd: e.s_cm, lfcc: e.s_asv })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn filter_gender(&self, gender: Gender) -> Self {
        Self { trials: self.trials.iter().filter(|t| t.gender == gender).cloned().collect() }
    }

    fn with_scores(&self, f: impl Fn(&PairedTrial) -> f64) -> TrialScoreSet {
        TrialScoreSet {
            entries: self
                .trials
                .iter()
                .map(|t| TrialEntry { trial_id: t.trial_id.clone(), gender: t.gender, class: t.class, score: f(t) })
                .collect(),
        }
    }

    pub fn fuse_weighted(&self, alpha: f64) -> Result<TrialScoreSet, FusionError> {
        check_alpha(alpha)?;
        Ok(self.with_scores(|t| alpha * t.gd + (1.0 - alpha) * t.lfcc))
    }

    /// Two-feature rows `(gd, lfcc)`; label 1 marks bona fide trials.
    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            layout: FeatureLayout::Flat(2),
            samples: self
                .trials
                .iter()
                .map(|t| Sample {
                    features: vec![t.gd, t.lfcc],
                    label: t.class.is_bonafide() as u8,
                    gender: t.gender,
                    source_id: t.trial_id.clone(),
                })
                .collect(),
        }
    }
}

/// `k step` for `k = 0, 1, ...` below 1, then exactly 1.
pub fn alpha_grid(step: f64) -> Result<Vec<f64>, FusionError> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(FusionError::BadGridStep(step));
    }
    let mut g: Vec<f64> = (0..).map(|k| k as f64 * step).take_while(|a| *a < 1.0 - 1e-12).collect();
    g.push(1.0);
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSweep {
    /// `(alpha, CM EER)` over the grid.
    pub curve: Vec<(f64, f64)>,
    pub best_alpha: f64,
    pub best_eer: f64,
}

/// CM EER of the fused scores at every grid alpha. The smallest alpha wins ties.
pub fn sweep_alpha(pairs: &PairedScores, grid_step: f64) -> Result<AlphaSweep, FusionError> {
    let grid = alpha_grid(grid_step)?;
    let curve = grid
        .par_iter()
        .map(|&a| Ok((a, eer(&pairs.fuse_weighted(a)?, Task::Cm)?.0)))
        .collect::<Result<Vec<_>, FusionError>>()?;
    let (best_alpha, best_eer) = curve.iter().fold((f64::NAN, f64::INFINITY), |b, &(a, e)| if e < b.1 { (a, e) } else { b });
    Ok(AlphaSweep { curve, best_alpha, best_eer })
}

/// Sweep on development and evaluation pairs, with the optimum of each.
#[derive(Debug, Clone, PartialEq)]
pub struct DevEvalSweep {
    pub dev: AlphaSweep,
    pub eval: AlphaSweep,
}

impl DevEvalSweep {
    pub fn run(dev: &PairedScores, eval: &PairedScores, grid_step: f64) -> Result<Self, FusionError> {
        Ok(Self { dev: sweep_alpha(dev, grid_step)?, eval: sweep_alpha(eval, grid_step)? })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,dev_eer,eval_eer\n");
        for (d, e) in self.dev.curve.iter().zip(&self.eval.curve) {
            let _ = writeln!(s, "{},{},{}", d.0, d.1, e.1);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMethod {
    WeightedAverage,
    Classifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionClassifierKind {
    LogisticRegression,
    Gbdt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneOn {
    Dev,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub method: FusionMethod,
    /// Fixed weight; `None` tunes it on the set named by `tune_on`.
    pub alpha: Option<f64>,
    pub grid_step: f64,
    pub classifier: FusionClassifierKind,
    pub logreg: LogregParams,
    pub gbdt: GbdtParams,
    pub gd_range: ScoreRange,
    pub lfcc_range: ScoreRange,
    pub tune_on: TuneOn,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            method: FusionMethod::WeightedAverage,
            alpha: None,
            grid_step: 0.01,
            classifier: FusionClassifierKind::LogisticRegression,
            logreg: LogregParams::default(),
            gbdt: GbdtParams::default(),
            gd_range: ScoreRange::Unit,
            lfcc_range: ScoreRange::Symmetric,
            tune_on: TuneOn::Dev,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        if let Some(a) = self.alpha {
            check_alpha(a)?;
        }
        alpha_grid(self.grid_step)?;
        Ok(())
    }
}

fn train(kind: FusionClassifierKind, data: &Dataset, logreg: &LogregParams, gbdt: &GbdtParams) -> Result<TrainedModel, FusionError> {
    Ok(match kind {
        FusionClassifierKind::LogisticRegression => TrainedModel::LogisticRegression(train_logreg(data, logreg)?),
        FusionClassifierKind::Gbdt => TrainedModel::Gbdt(train_gbdt(data, gbdt)?),
    })
}

pub fn score_pairs(model: &TrainedModel, pairs: &PairedScores) -> Result<TrialScoreSet, FusionError> {
    let entries = pairs
        .trials
        .iter()
        .map(|t| {
            Ok(TrialEntry {
                trial_id: t.trial_id.clone(),
                gender: t.gender,
                class: t.class,
                score: model.score(&[t.gd, t.lfcc])?,
            })
        })
        .collect::<Result<_, FusionError>>()?;
    Ok(TrialScoreSet { entries })
}

/// Trains one classifier on `train` and scores `eval`.
pub fn fuse_classifier(
    train_pairs: &PairedScores,
    eval_pairs: &PairedScores,
    kind: FusionClassifierKind,
    logreg: &LogregParams,
    gbdt: &GbdtParams,
) -> Result<TrialScoreSet, FusionError> {
    let model = train(kind, &train_pairs.to_dataset(), logreg, gbdt)?;
    score_pairs(&model, eval_pairs)
}

/// Hyperparameter candidates searched by [`tune_fusion_classifier`].
pub fn fusion_grid(kind: FusionClassifierKind, logreg: &LogregParams, gbdt: &GbdtParams) -> Vec<(LogregParams, GbdtParams)> {
    match kind {
        FusionClassifierKind::LogisticRegression => [1e-6, 1e-5, 1e-4, 1e-3, 1e-2]
            .iter()
            .map(|&l2| (LogregParams { l2, ..logreg.clone() }, gbdt.clone()))
            .collect(),
        FusionClassifierKind::Gbdt => [2, 3, 4]
            .iter()
            .flat_map(|&max_depth| {
                [25, 50, 100].map(|n_trees| (logreg.clone(), GbdtParams { max_depth, n_trees, ..gbdt.clone() }))
            })
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct TunedFusion {
    pub model: TrainedModel,
    pub logreg: LogregParams,
    pub gbdt: GbdtParams,
    /// CM EER on the tuning set for each grid point, in grid order.
    pub tuning_eers: Vec<f64>,
    pub best_index: usize,
}

/// Trains every grid candidate on `train` and keeps the one with the lowest
/// CM EER on `tune`; the first candidate wins ties.
pub fn tune_fusion_classifier(
    train_pairs: &PairedScores,
    tune_pairs: &PairedScores,
    kind: FusionClassifierKind,
    logreg: &LogregParams,
    gbdt: &GbdtParams,
) -> Result<TunedFusion, FusionError> {
    let data = train_pairs.to_dataset();
    let mut best: Option<TunedFusion> = None;
    let mut eers = Vec::new();
    for (i, (lp, gp)) in fusion_grid(kind, logreg, gbdt).into_iter().enumerate() {
        let model = train(kind, &data, &lp, &gp)?;
        let e = eer(&score_pairs(&model, tune_pairs)?, Task::Cm)?.0;
        eers.push(e);
        if best.as_ref().is_none_or(|b| e < b.tuning_eers[b.best_index]) {
            best = Some(TunedFusion { model, logreg: lp, gbdt: gp, tuning_eers: Vec::new(), best_index: i });
        }
        if let Some(b) = best.as_mut() {
            b.tuning_eers = eers.clone();
        }
    }
    Ok(best.expect("grid is never empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::TrialClass::{NonTarget, Spoof, Target};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn pairs(rng: &mut ChaCha8Rng, n: usize, f: impl Fn(&mut ChaCha8Rng, bool) -> (f64, f64)) -> PairedScores {
        PairedScores {
            trials: (0..n)
                .map(|i| {
                    let class = [Target, NonTarget, Spoof, Spoof][i % 4];
                    let (gd, lfcc) = f(rng, class.is_bonafide());
                    PairedTrial { trial_id: format!("t{i}"), gender: Gender::Unknown, class, gd, lfcc }
                })
                .collect(),
        }
    }

    #[test]
    fn unit_mapping() {
        assert_eq!(map_to_unit(-1.0, ScoreRange::Symmetric).unwrap(), 0.0);
        assert_eq!(map_to_unit(1.0, ScoreRange::Symmetric).unwrap(), 1.0);
        assert_eq!(map_to_unit(0.3, ScoreRange::Unit).unwrap(), 0.3);
        assert_eq!(map_to_unit(1.0 + 1e-10, ScoreRange::Unit).unwrap(), 1.0);
        assert!(matches!(map_to_unit(1.1, ScoreRange::Unit), Err(FusionError::OutOfDeclaredRange { .. })));
        assert!(map_to_unit(-1.0 - 1e-8, ScoreRange::Symmetric).is_err());
        assert!(map_to_unit(f64::NAN, ScoreRange::Unit).is_err());
    }

    #[test]
    fn symmetric_grid_halves_spacing() {
        let xs: Vec<f64> = (0..=200).map(|k| -1.0 + k as f64 * 0.01).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| map_to_unit(x, ScoreRange::Symmetric).unwrap()).collect();
        assert!((ys[0]).abs() < 1e-15 && (ys[200] - 1.0).abs() < 1e-12);
        for w in ys.windows(2) {
            assert!((w[1] - w[0] - 0.005).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_endpoints() {
        assert_eq!(fuse_weighted(0.2, 0.8, 1.0).unwrap(), 0.2);
        assert_eq!(fuse_weighted(0.2, 0.8, 0.0).unwrap(), 0.8);
        assert_eq!(fuse_weighted(0.2, 0.8, 0.5).unwrap(), 0.5);
        assert!(matches!(fuse_weighted(0.2, 0.8, 1.01), Err(FusionError::BadAlpha(_))));
    }

    #[test]
    fn grid_ends_at_one() {
        let g = alpha_grid(0.01).unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!((g[0], g[100]), (0.0, 1.0));
        assert_eq!(alpha_grid(0.3).unwrap(), vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert!(alpha_grid(0.0).is_err() && alpha_grid(0.6).is_err());
    }

    #[test]
    fn identical_streams_pick_alpha_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = pairs(&mut rng, 80, |r, b| {
            let s: f64 = r.random_range(0.0..1.0) * 0.7 + if b { 0.3 } else { 0.0 };
            (s, s)
        });
        let sw = sweep_alpha(&p, 0.01).unwrap();
        assert_eq!(sw.best_alpha, 0.0);
        assert!(sw.curve.iter().all(|c| c.1 == sw.curve[0].1));
    }

    #[test]
    fn sweep_never_worse_than_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = pairs(&mut rng, 200, |r, b| (if b { 0.9 } else { 0.1 }, r.random_range(0.0..1.0)));
        let sw = sweep_alpha(&p, 0.01).unwrap();
        let e0 = eer(&p.fuse_weighted(0.0).unwrap(), Task::Cm).unwrap().0;
        let e1 = eer(&p.fuse_weighted(1.0).unwrap(), Task::Cm).unwrap().0;
        assert!(sw.best_eer <= e0.min(e1));
        assert_eq!(sw.curve[0].1, e0);
        assert_eq!(sw.curve[100].1, e1);
    }

    #[test]
    fn sweep_matches_exhaustive_oracle_and_ignores_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = pairs(&mut rng, 100, |r, b| {
            let m = if b { 0.6 } else { 0.4 };
            (m + r.random_range(-0.3..0.3), m + r.random_range(-0.3..0.3))
        });
        let sw = sweep_alpha(&p, 0.05).unwrap();
        // oracle: counts over every fused score used as a threshold
        let mut best = (f64::NAN, f64::INFINITY);
        for k in 0..=20 {
            let a = if k == 20 { 1.0 } else { k as f64 * 0.05 };
            let fused: Vec<(bool, f64)> = p.trials.iter().map(|t| (t.class.is_bonafide(), a * t.gd + (1.0 - a) * t.lfcc)).collect();
            let nb = fused.iter().filter(|f| f.0).count() as f64;
            let ns = fused.len() as f64 - nb;
            let mut e = (f64::INFINITY, 0.0);
            for tau in fused.iter().map(|f| f.1).chain([f64::INFINITY]) {
                let pm = fused.iter().filter(|f| f.0 && f.1 < tau).count() as f64 / nb;
                let pf = fused.iter().filter(|f| !f.0 && f.1 >= tau).count() as f64 / ns;
                if (pm - pf).abs() < e.0 {
                    e = ((pm - pf).abs(), (pm + pf) / 2.0);
                }
            }
            if e.1 < best.1 {
                best = (a, e.1);
            }
        }
        assert_eq!((sw.best_alpha, sw.best_eer), best);
        let mut rev = p.clone();
        rev.trials.reverse();
        assert_eq!(sweep_alpha(&rev, 0.05).unwrap(), sw);
    }

    #[test]
    fn classifier_learns_axis_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let make = |rng: &mut ChaCha8Rng, n: usize| PairedScores {
            trials: (0..n)
                .map(|i| {
                    let gd: f64 = rng.random_range(0.0..1.0);
                    let lfcc: f64 = rng.random_range(0.0..1.0);
                    let class = if lfcc > 0.5 { Target } else { Spoof };
                    PairedTrial { trial_id: format!("t{i}"), gender: Gender::Unknown, class, gd, lfcc }
                })
                .collect(),
        };
        let train = make(&mut rng, 600);
        let tune = make(&mut rng, 300);
        let test = make(&mut rng, 400);
        for kind in [FusionClassifierKind::LogisticRegression, FusionClassifierKind::Gbdt] {
            let t = tune_fusion_classifier(&train, &tune, kind, &LogregParams::default(), &GbdtParams::default()).unwrap();
            let s = fuse_classifier(&train, &test, kind, &t.logreg, &t.gbdt).unwrap();
            assert_eq!(s, score_pairs(&t.model, &test).unwrap());
            let correct = s.entries.iter().filter(|e| (e.score > 0.5) == e.class.is_bonafide()).count();
            assert!(correct as f64 / 400.0 >= 0.99, "{kind:?}: {correct}/400");
        }
    }

    #[test]
    fn constant_features_give_constant_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = pairs(&mut rng, 40, |_, _| (0.5, 0.5));
        for kind in [FusionClassifierKind::LogisticRegression, FusionClassifierKind::Gbdt] {
            let s = fuse_classifier(&p, &p, kind, &LogregParams::default(), &GbdtParams::default()).unwrap();
            assert!(s.entries.iter().all(|e| e.score == s.entries[0].score));
        }
    }

    #[test]
    fn logistic_fusion_is_not_worse_than_streams() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = Normal::new(0.0, 1.0).unwrap();
        let gen = |rng: &mut ChaCha8Rng, b: bool| {
            let m = if b { 1.0 } else { -1.0 };
            (m + n.sample(rng), 0.8 * m + n.sample(rng))
        };
        let train = pairs(&mut rng, 2000, gen);
        let test = pairs(&mut rng, 2000, gen);
        let fused = fuse_classifier(&train, &test, FusionClassifierKind::LogisticRegression, &LogregParams::default(), &GbdtParams::default())
            .unwrap();
        let fe = eer(&fused, Task::Cm).unwrap().0;
        let e_gd = eer(&test.fuse_weighted(1.0).unwrap(), Task::Cm).unwrap().0;
        let e_lf = eer(&test.fuse_weighted(0.0).unwrap(), Task::Cm).unwrap().0;
        assert!(fe <= e_gd.min(e_lf) + 0.005, "{fe} vs {e_gd} {e_lf}");
    }

    #[test]
    fn tuning_grid_picks_lowest_eer() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gen = |r: &mut ChaCha8Rng, b: bool| {
            let m = if b { 0.7 } else { 0.3 };
            (m + r.random_range(-0.3..0.3), m + r.random_range(-0.3..0.3))
        };
        let train = pairs(&mut rng, 300, gen);
        let tune = pairs(&mut rng, 300, gen);
        let t = tune_fusion_classifier(&train, &tune, FusionClassifierKind::Gbdt, &LogregParams::default(), &GbdtParams::default())
            .unwrap();
        assert_eq!(t.tuning_eers.len(), 9);
        let min = t.tuning_eers.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(t.tuning_eers[t.best_index], min);
        assert_eq!(t.tuning_eers.iter().position(|&e| e == min), Some(t.best_index));
    }

    proptest::proptest! {
        #[test]
        fn weighted_fusion_is_monotone_in_each_input(
            a in 0.0f64..=1.0, x in -1e3f64..1e3, y in -1e3f64..1e3, dx in 0.0f64..1e3, dy in 0.0f64..1e3,
        ) {
            let base = fuse_weighted(x, y, a).unwrap();
            proptest::prop_assert!(fuse_weighted(x + dx, y, a).unwrap() >= base);
            proptest::prop_assert!(fuse_weighted(x, y + dy, a).unwrap() >= base);
        }
    }
}
