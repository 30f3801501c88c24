//! Gender recognizer and countermeasure training.

use std::fmt::Write as _;
use std::path::PathBuf;

use log::{info, warn};

use super::config::{GenderClassifierKind, GenderConfig, RunConfig};
use super::features::{load_embeddings, ModelPair};
use super::manifest::{Manifest, ManifestRow, Split};
use crate::classifiers::{
    config_hash, smote_oversample, GbdtParams, train_gbdt, train_grouped_mlp, train_logreg, Dataset, GroupedMlpSpec, TrainedModel,
};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::fusion::{fusion_grid, FusionClassifierKind};
use crate::labels::Gender;

pub fn classifier_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.dir("models").join(format!("{name}.model"))
}

pub fn load_classifier(cfg: &RunConfig, name: &str, producer: &'static str) -> Result<TrainedModel> {
    let path = classifier_path(cfg, name);
    if !path.exists() {
        return Err(Error::MissingArtifact { path, producer });
    }
    Ok(TrainedModel::load(path)?.0)
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(Error::io(d))?;
    }
    std::fs::write(&path, text).map_err(Error::io(path))
}

fn gender_label(g: Gender) -> Option<u8> {
    match g {
        Gender::Male => Some(1),
        Gender::Female => Some(0),
        Gender::Unknown => None,
    }
}

fn gender_rows<'a>(
    manifest: &'a Manifest,
    emb: &'a [Embedding],
    split: Split,
) -> impl Iterator<Item = (&'a Embedding, u8, Gender)> {
    manifest
        .rows
        .iter()
        .zip(emb)
        .filter(move |(r, _)| r.split == split)
        .filter_map(|(r, e)| gender_label(r.gender).map(|l| (e, l, r.gender)))
}

/// Held-out accuracy of the gender recognizer, per split.
#[derive(Debug, Clone, PartialEq)]
pub struct GenderReport {
    /// `(split, correct, total)`.
    pub splits: Vec<(Split, usize, usize)>,
}

impl GenderReport {
    pub fn accuracy(&self, split: Split) -> Option<f64> {
        self.splits.iter().find(|s| s.0 == split).filter(|s| s.2 > 0).map(|s| s.1 as f64 / s.2 as f64)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("split  correct  total  accuracy\n");
        for &(split, c, n) in &self.splits {
            let acc = if n > 0 { format!("{:.6}", c as f64 / n as f64) } else { "n/a".into() };
            let _ = writeln!(s, "{:<6} {:>7}  {:>5}  {acc}", split.name(), c, n);
        }
        s
    }
}

/// Male when the recognizer's score is at least 0.5.
pub fn predict_gender(model: &TrainedModel, e: &Embedding) -> Result<(Gender, f64)> {
    let p = model.score(e.values())?;
    Ok((if p >= 0.5 { Gender::Male } else { Gender::Female }, p))
}

/// `(correct, total, mean log-loss)` of the recognizer over `rows`.
fn accuracy<'a>(model: &TrainedModel, rows: impl Iterator<Item = (&'a Embedding, u8, Gender)>) -> Result<(usize, usize, f64)> {
    let mut correct = 0;
    let mut total = 0;
    let mut loss = 0.0;
    for (e, label, _) in rows {
        let (g, p) = predict_gender(model, e)?;
        correct += usize::from(gender_label(g) == Some(label));
        total += 1;
        let p = p.clamp(1e-12, 1.0 - 1e-12);
        loss -= if label == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok((correct, total, loss / total.max(1) as f64))
}

/// Candidates for the dev-set grid search, the configured point first.
fn gender_grid(cfg: &GenderConfig) -> Vec<GenderConfig> {
    let mut out = vec![cfg.clone()];
    out.extend(fusion_grid(
        match cfg.classifier {
            GenderClassifierKind::LogisticRegression => FusionClassifierKind::LogisticRegression,
            GenderClassifierKind::Gbdt => FusionClassifierKind::Gbdt,
        },
        &cfg.logreg,
        &cfg.gbdt,
    )
    .into_iter()
    .flat_map(|(logreg, gbdt)| {
        let cols: &[f64] = match cfg.classifier {
            GenderClassifierKind::LogisticRegression => &[1.0],
            GenderClassifierKind::Gbdt => &[1.0, 0.5, 0.2, 0.1],
        };
        cols.iter()
            .map(|&colsample_bytree| GenderConfig {
                logreg: logreg.clone(),
                gbdt: GbdtParams { colsample_bytree, ..gbdt.clone() },
                ..cfg.clone()
            })
            .collect::<Vec<_>>()
    }));
    out
}

fn fit_gender(data: &Dataset, cfg: &GenderConfig) -> Result<TrainedModel> {
    Ok(match cfg.classifier {
        GenderClassifierKind::LogisticRegression => TrainedModel::LogisticRegression(train_logreg(data, &cfg.logreg)?),
        GenderClassifierKind::Gbdt => TrainedModel::Gbdt(train_gbdt(data, &cfg.gbdt)?),
    })
}

pub fn cmd_train_gender(cfg: &RunConfig, manifest: &Manifest) -> Result<GenderReport> {
    let emb = load_embeddings(cfg, manifest, ModelPair::Gender)?;
    let data = Dataset::flat_from_embeddings(gender_rows(manifest, &emb, Split::Train))?;
    let has_dev = gender_rows(manifest, &emb, Split::Dev).next().is_some();
    let candidates = if cfg.gender.tune_on_dev && has_dev { gender_grid(&cfg.gender) } else { vec![cfg.gender.clone()] };
    // most dev hits first, then lowest dev log-loss, then grid order
    let mut best: Option<((usize, f64), TrainedModel, GenderConfig)> = None;
    for c in candidates {
        let model = fit_gender(&data, &c)?;
        let (correct, _, loss) = accuracy(&model, gender_rows(manifest, &emb, Split::Dev))?;
        if best.as_ref().is_none_or(|b| correct > b.0 .0 || (correct == b.0 .0 && loss < b.0 .1)) {
            best = Some(((correct, loss), model, c));
        }
    }
    let (_, model, chosen) = best.expect("at least one candidate");
    model.save(classifier_path(cfg, "gender"), &config_hash(&chosen))?;
    let mut splits = Vec::new();
    for split in Split::ALL {
        let (correct, total, _) = accuracy(&model, gender_rows(manifest, &emb, split))?;
        splits.push((split, correct, total));
    }
    let report = GenderReport { splits };
    write_text(cfg.dir("reports").join("gender.txt"), &report.to_text())?;
    info!("train-gender: {} model, eval accuracy {:?}", model.kind_name(), report.accuracy(Split::Eval));
    Ok(report)
}

/// One of the three countermeasure networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmSystem {
    Male,
    Female,
    GenderIndependent,
}

impl CmSystem {
    pub const ALL: [CmSystem; 3] = [CmSystem::Male, CmSystem::Female, CmSystem::GenderIndependent];

    pub fn pair(self) -> ModelPair {
        match self {
            CmSystem::Male => ModelPair::CmMale,
            CmSystem::Female => ModelPair::CmFemale,
            CmSystem::GenderIndependent => ModelPair::CmGi,
        }
    }

    pub fn model_name(self) -> &'static str {
        self.pair().name()
    }

    pub fn for_pair(pair: ModelPair) -> Option<Self> {
        CmSystem::ALL.into_iter().find(|s| s.pair() == pair)
    }

    fn spec(self, cfg: &RunConfig) -> &GroupedMlpSpec {
        match self {
            CmSystem::Male => &cfg.cm.male,
            CmSystem::Female => &cfg.cm.female,
            CmSystem::GenderIndependent => &cfg.cm.gender_independent,
        }
    }

    fn accepts(self, r: &ManifestRow) -> bool {
        match self {
            CmSystem::Male => r.gender == Gender::Male,
            CmSystem::Female => r.gender == Gender::Female,
            CmSystem::GenderIndependent => true,
        }
    }
}

fn cm_dataset(manifest: &Manifest, emb: &[Embedding], split: Split, sys: CmSystem) -> Result<Dataset> {
    let rows = manifest
        .rows
        .iter()
        .zip(emb)
        .filter(|(r, _)| r.split == split && sys.accepts(r))
        .map(|(r, e)| (e, u8::from(r.is_bonafide()), r.gender));
    Ok(Dataset::grouped_from_embeddings(rows)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmTrainSummary {
    pub system: CmSystem,
    pub train_rows: usize,
    /// Rows after oversampling.
    pub fitted_rows: usize,
    pub final_loss: f64,
    pub final_dev_eer: Option<f64>,
}

/// Trains every countermeasure network whose training subset is non-empty.
pub fn cmd_train_cm(cfg: &RunConfig, manifest: &Manifest) -> Result<Vec<CmTrainSummary>> {
    let mut out = Vec::new();
    for sys in CmSystem::ALL {
        let emb = match load_embeddings(cfg, manifest, sys.pair()) {
            Ok(e) => e,
            Err(Error::MissingArtifact { .. }) if sys != CmSystem::GenderIndependent => {
                warn!("train-cm: no {} embeddings, skipping", sys.model_name());
                continue;
            }
            Err(e) => return Err(e),
        };
        let data = cm_dataset(manifest, &emb, Split::Train, sys)?;
        if data.is_empty() {
            warn!("train-cm: no training rows for {}, skipping", sys.model_name());
            continue;
        }
        let fitted = if cfg.cm.smote && data.count_label(1) != data.count_label(0) {
            smote_oversample(&data, cfg.cm.smote_k, cfg.cm.smote_seed)?
        } else {
            data.clone()
        };
        let dev = cm_dataset(manifest, &emb, Split::Dev, sys)?;
        let dev = (dev.count_label(0) > 0 && dev.count_label(1) > 0).then_some(dev);
        let spec = sys.spec(cfg);
        let (model, log) = train_grouped_mlp(&fitted, spec, dev.as_ref())?;
        let model = TrainedModel::GroupedMlp(model);
        model.save(classifier_path(cfg, sys.model_name()), &config_hash(spec))?;
        write_text(cfg.dir("logs").join(format!("{}_train.csv", sys.model_name())), &log.to_csv())?;
        let last = log.rows.last().copied();
        let summary = CmTrainSummary {
            system: sys,
            train_rows: data.len(),
            fitted_rows: fitted.len(),
            final_loss: last.map_or(f64::NAN, |r| r.1),
            final_dev_eer: last.and_then(|r| r.2),
        };
        info!(
            "train-cm: {} on {} rows ({} after oversampling), dev EER {:?}",
            sys.model_name(),
            summary.train_rows,
            summary.fitted_rows,
            summary.final_dev_eer
        );
        out.push(summary);
    }
    Ok(out)
}
