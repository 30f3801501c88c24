//! Countermeasure scoring with gender routing.

use std::collections::HashMap;
use std::path::PathBuf;

use log::info;

use super::config::{GenderMode, RunConfig};
use super::features::{load_embeddings, ModelPair};
use super::manifest::{Manifest, Split};
use super::train::{load_classifier, predict_gender, CmSystem};
use crate::classifiers::TrainedModel;
use crate::embedding::{regroup_values, Embedding};
use crate::error::{Error, Result};
use crate::fusion::{map_to_unit, ScoreRange};
use crate::labels::Gender;
use crate::metrics::{TrialEntry, TrialScoreSet};

pub fn cm_scores_path(cfg: &RunConfig, split: Split, mode: GenderMode) -> PathBuf {
    cfg.dir("scores").join(format!("{split}_cm_{mode}.txt"))
}

pub fn gender_scores_path(cfg: &RunConfig, split: Split) -> PathBuf {
    cfg.dir("scores").join(format!("{split}_gender.txt"))
}

pub fn read_scores(path: PathBuf, producer: &'static str) -> Result<TrialScoreSet> {
    if !path.exists() {
        return Err(Error::MissingArtifact { path, producer });
    }
    Ok(TrialScoreSet::read(path)?)
}

/// Countermeasure score in [0, 1]; one-class-softmax heads are mapped from [-1, 1].
pub fn cm_score(model: &TrainedModel, e: &Embedding) -> Result<f64> {
    let s = model.score(&regroup_values(e.values()).to_group_major())?;
    let range = if model.symmetric_scores() { ScoreRange::Symmetric } else { ScoreRange::Unit };
    Ok(map_to_unit(s, range)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    pub split: Split,
    pub trials: usize,
    /// Rows routed to each countermeasure pair.
    pub routed: Vec<(ModelPair, usize)>,
}

/// Scores the dev and eval splits under `cfg.gender_mode`.
pub fn cmd_score(cfg: &RunConfig, manifest: &Manifest) -> Result<Vec<ScoreSummary>> {
    let mode = cfg.gender_mode;
    let gender = if mode == GenderMode::GenderDependent {
        let model = load_classifier(cfg, "gender", "train-gender")?;
        Some((model, load_embeddings(cfg, manifest, ModelPair::Gender)?))
    } else {
        None
    };
    let mut models: HashMap<ModelPair, (TrainedModel, Vec<Embedding>)> = HashMap::new();
    let mut out = Vec::new();
    for split in [Split::Dev, Split::Eval] {
        let idx: Vec<usize> = (0..manifest.rows.len()).filter(|&i| manifest.rows[i].split == split).collect();
        if idx.is_empty() {
            continue;
        }
        let mut gender_set = Vec::new();
        let mut cm_set = Vec::with_capacity(idx.len());
        let mut routed: HashMap<ModelPair, usize> = HashMap::new();
        for &i in &idx {
            let row = &manifest.rows[i];
            let route = match (&gender, mode) {
                (_, GenderMode::GenderIndependent) => Gender::Unknown,
                (_, GenderMode::OracleLabels) => row.gender,
                (Some((m, emb)), _) => {
                    let (g, p) = predict_gender(m, &emb[i])?;
                    gender_set.push(TrialEntry { trial_id: row.trial_id.clone(), gender: row.gender, class: row.class, score: p });
                    g
                }
                (None, _) => unreachable!("gender model loaded for gender-dependent mode"),
            };
            let pair = ModelPair::cm_for(route);
            if !models.contains_key(&pair) {
                let sys = CmSystem::for_pair(pair).expect("countermeasure pair");
                let model = load_classifier(cfg, sys.model_name(), "train-cm")?;
                models.insert(pair, (model, load_embeddings(cfg, manifest, pair)?));
            }
            let (model, emb) = &models[&pair];
            *routed.entry(pair).or_default() += 1;
            cm_set.push(TrialEntry {
                trial_id: row.trial_id.clone(),
                gender: row.gender,
                class: row.class,
                score: cm_score(model, &emb[i])?,
            });
        }
        let dir = cfg.dir("scores");
        std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        TrialScoreSet::new(cm_set)?.write(cm_scores_path(cfg, split, mode))?;
        if !gender_set.is_empty() {
            TrialScoreSet::new(gender_set)?.write(gender_scores_path(cfg, split))?;
        }
        let mut routed: Vec<_> = routed.into_iter().collect();
        routed.sort();
        info!("score: {split} {} trials under {mode}, routed {routed:?}", idx.len());
        out.push(ScoreSummary { split, trials: idx.len(), routed });
    }
    Ok(out)
}
