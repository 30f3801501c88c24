//! Fusion of the gender-aware countermeasure with the second stream, and
//! PCA export of gender embeddings.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use log::info;

use super::config::RunConfig;
use super::features::{load_embeddings, ModelPair};
use super::manifest::{Manifest, Split};
use super::score::{cm_scores_path, read_scores};
use crate::embedding::pca_project;
use crate::error::{Error, Result};
use crate::fusion::{
    map_set_to_unit, score_pairs, sweep_alpha, tune_fusion_classifier, DevEvalSweep, FusionMethod, PairedScores, TuneOn,
};
use crate::labels::Gender;
use crate::metrics::{eer, Task, TrialScoreSet};

fn subset(set: &TrialScoreSet, ids: &HashSet<&str>) -> TrialScoreSet {
    TrialScoreSet { entries: set.entries.iter().filter(|e| ids.contains(e.trial_id.as_str())).cloned().collect() }
}

fn paired(cfg: &RunConfig, lfcc: &TrialScoreSet, split: Split) -> Result<PairedScores> {
    let gd = read_scores(cm_scores_path(cfg, split, cfg.gender_mode), "score")?;
    let ids: HashSet<&str> = gd.entries.iter().map(|e| e.trial_id.as_str()).collect();
    let lf = subset(lfcc, &ids);
    if lf.len() != gd.len() {
        return Err(Error::Data(format!(
            "{split}: {} of {} countermeasure trials have no second-stream score",
            gd.len() - lf.len(),
            gd.len()
        )));
    }
    let gd = map_set_to_unit(&gd, cfg.fusion.gd_range)?;
    let lf = map_set_to_unit(&lf, cfg.fusion.lfcc_range)?;
    Ok(PairedScores::join(&gd, &lf)?)
}

pub fn fused_scores_path(cfg: &RunConfig, split: Split) -> PathBuf {
    cfg.dir("fusion").join(format!("{split}_fused.txt"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionSummary {
    /// Weight of the gender-aware stream; `None` for classifier fusion.
    pub alpha: Option<f64>,
    /// `(split, gd EER, second-stream EER, fused EER)`.
    pub eers: Vec<(Split, f64, f64, f64)>,
}

impl FusionSummary {
    pub fn to_text(&self) -> String {
        let mut s = match self.alpha {
            Some(a) => format!("method weighted_average  alpha {a}\n"),
            None => "method classifier\n".to_string(),
        };
        s.push_str("split  gd_eer    lfcc_eer  fused_eer\n");
        for (split, g, l, f) in &self.eers {
            let _ = writeln!(s, "{:<6} {g:.6}  {l:.6}  {f:.6}", split.name());
        }
        s
    }
}

pub fn cmd_fuse(cfg: &RunConfig) -> Result<FusionSummary> {
    let fc = &cfg.fusion;
    let lfcc = read_scores(cfg.lfcc_scores_path(), "synth")?;
    let dev = paired(cfg, &lfcc, Split::Dev)?;
    let eval = paired(cfg, &lfcc, Split::Eval)?;
    let dir = cfg.dir("fusion");
    std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;

    let (alpha, fused_dev, fused_eval) = match fc.method {
        FusionMethod::WeightedAverage => {
            let sweep = DevEvalSweep::run(&dev, &eval, fc.grid_step)?;
            let p = dir.join("alpha_sweep.csv");
            std::fs::write(&p, sweep.to_csv()).map_err(Error::io(p))?;
            let a = fc.alpha.unwrap_or(match fc.tune_on {
                TuneOn::Dev => sweep.dev.best_alpha,
                TuneOn::Eval => sweep.eval.best_alpha,
            });
            (Some(a), dev.fuse_weighted(a)?, eval.fuse_weighted(a)?)
        }
        FusionMethod::Classifier => {
            let tune = match fc.tune_on {
                TuneOn::Dev => &dev,
                TuneOn::Eval => &eval,
            };
            let t = tune_fusion_classifier(&dev, tune, fc.classifier, &fc.logreg, &fc.gbdt)?;
            (None, score_pairs(&t.model, &dev)?, score_pairs(&t.model, &eval)?)
        }
    };

    let mut eers = Vec::new();
    for (split, pairs, fused) in [(Split::Dev, &dev, &fused_dev), (Split::Eval, &eval, &fused_eval)] {
        fused.write(fused_scores_path(cfg, split))?;
        let g = eer(&pairs.fuse_weighted(1.0)?, Task::Cm)?.0;
        let l = eer(&pairs.fuse_weighted(0.0)?, Task::Cm)?.0;
        eers.push((split, g, l, eer(fused, Task::Cm)?.0));
    }
    let summary = FusionSummary { alpha, eers };
    let p = dir.join("summary.txt");
    std::fs::write(&p, summary.to_text()).map_err(Error::io(p))?;
    info!("fuse: {:?}", summary.eers);
    Ok(summary)
}

/// Best weight on one paired set, for callers that hold scores in memory.
pub fn best_alpha(pairs: &PairedScores, grid_step: f64) -> Result<f64> {
    Ok(sweep_alpha(pairs, grid_step)?.best_alpha)
}

/// Projects the gender embeddings of one split to `dims` components.
pub fn cmd_pca_export(cfg: &RunConfig, manifest: &Manifest, split: Split, dims: usize) -> Result<PathBuf> {
    let emb = load_embeddings(cfg, manifest, ModelPair::Gender)?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut chosen = Vec::new();
    for (r, e) in manifest.rows.iter().zip(emb) {
        if r.split == split {
            ids.push(r.trial_id.clone());
            labels.push(
                match r.gender {
                    Gender::Male => "male",
                    Gender::Female => "female",
                    Gender::Unknown => "unknown",
                }
                .to_string(),
            );
            chosen.push(e);
        }
    }
    let pca = pca_project(&chosen, dims)?;
    let dir = cfg.dir("pca");
    std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    let path = dir.join(format!("gender_{split}.csv"));
    std::fs::write(&path, pca.to_csv(&ids, &labels)).map_err(Error::io(&path))?;
    info!("pca-export: {} rows, explained variance {:?}", ids.len(), pca.explained_variance_ratio);
    Ok(path)
}
