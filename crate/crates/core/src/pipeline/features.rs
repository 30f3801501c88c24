//! PMF extraction, class-model building and embedding extraction.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use log::info;
use rayon::prelude::*;

use super::config::RunConfig;
use super::manifest::{Manifest, ManifestRow, Split};
use crate::audio_io::{clip_to_unit, read_audio};
use crate::embedding::{read_embeddings, write_embeddings, Embedder, Embedding, EmbeddingMeta};
use crate::error::{Error, Result};
use crate::filterbank::{apply_channel, design_bank, FilterBank, CHANNELS};
use crate::labels::Gender;
use crate::pmf::{compute_pmf, GroupAccumulator, Pmf, PmfGroupModel};

/// Filters, clips and histograms one utterance: one PMF per channel.
pub fn utterance_pmfs(bank: &FilterBank, row: &ManifestRow) -> Result<Vec<Pmf>> {
    let audio = read_audio(&row.path)?;
    (1..=CHANNELS)
        .map(|c| {
            let y = clip_to_unit(&apply_channel(bank, c, &audio)?)?;
            Ok(compute_pmf(&y)?)
        })
        .collect()
}

/// A pair of class models that defines one embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelPair {
    /// Female vs male; positive embedding values lean male.
    Gender,
    /// Spoof vs bona fide within male speech.
    CmMale,
    CmFemale,
    /// Spoof vs bona fide over all speakers.
    CmGi,
}

impl ModelPair {
    pub const ALL: [ModelPair; 4] = [ModelPair::Gender, ModelPair::CmMale, ModelPair::CmFemale, ModelPair::CmGi];

    pub fn name(self) -> &'static str {
        match self {
            ModelPair::Gender => "gender",
            ModelPair::CmMale => "cm_male",
            ModelPair::CmFemale => "cm_female",
            ModelPair::CmGi => "cm_gi",
        }
    }

    /// `(class1, class2)` group names; the embedding is `d(class2) - d(class1)`.
    pub fn groups(self) -> (&'static str, &'static str) {
        match self {
            ModelPair::Gender => ("female", "male"),
            ModelPair::CmMale => ("spoof_male", "bonafide_male"),
            ModelPair::CmFemale => ("spoof_female", "bonafide_female"),
            ModelPair::CmGi => ("spoof", "bonafide"),
        }
    }

    /// Countermeasure pair for a gender; unknown gender uses the pooled pair.
    pub fn cm_for(gender: Gender) -> Self {
        match gender {
            Gender::Male => ModelPair::CmMale,
            Gender::Female => ModelPair::CmFemale,
            Gender::Unknown => ModelPair::CmGi,
        }
    }
}

impl fmt::Display for ModelPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelPair {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ModelPair::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown model pair '{s}'"))
    }
}

/// Every group a train-split row contributes to.
fn groups_of(row: &ManifestRow) -> Vec<&'static str> {
    let bona = row.is_bonafide();
    let mut out = vec![if bona { "bonafide" } else { "spoof" }];
    match row.gender {
        Gender::Male => out.extend(["male", if bona { "bonafide_male" } else { "spoof_male" }]),
        Gender::Female => out.extend(["female", if bona { "bonafide_female" } else { "spoof_female" }]),
        Gender::Unknown => {}
    }
    out
}

pub fn model_path(cfg: &RunConfig, group: &str) -> PathBuf {
    cfg.dir("models").join(format!("{group}.pmfm"))
}

pub fn embedding_stem(cfg: &RunConfig, pair: ModelPair) -> PathBuf {
    cfg.dir("embeddings").join(pair.name())
}

fn bank(cfg: &RunConfig) -> Result<FilterBank> {
    Ok(design_bank(cfg.sample_rate_hz, &cfg.filterbank)?)
}

/// Rows are processed in parallel in blocks of this many per worker, then
/// folded in manifest order.
fn block_len() -> usize {
    4 * rayon::current_num_threads()
}

/// PMF models for every group of the training split that has members.
pub fn cmd_build_models(cfg: &RunConfig, manifest: &Manifest) -> Result<BTreeMap<String, u64>> {
    let bank = bank(cfg)?;
    let rows: Vec<&ManifestRow> = manifest.split(Split::Train).collect();
    if rows.is_empty() {
        return Err(Error::Data("manifest has no train rows to build models from".into()));
    }
    let mut acc: BTreeMap<&str, GroupAccumulator> = BTreeMap::new();
    for block in rows.chunks(block_len()) {
        let pmfs = block.par_iter().map(|r| utterance_pmfs(&bank, r)).collect::<Result<Vec<_>>>()?;
        for (r, p) in block.iter().zip(&pmfs) {
            for g in groups_of(r) {
                acc.entry(g).or_insert_with(|| GroupAccumulator::new(g, CHANNELS)).add_file(p)?;
            }
        }
    }
    let dir = cfg.dir("models");
    std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    let mut counts = BTreeMap::new();
    for (g, a) in acc {
        counts.insert(g.to_string(), a.file_count());
        let model = a.finish()?;
        model.save(model_path(cfg, g))?;
        info!("build-models: {g} from {} files", model.file_count);
    }
    Ok(counts)
}

fn load_model(cfg: &RunConfig, group: &str) -> Result<PmfGroupModel> {
    let path = model_path(cfg, group);
    if !path.exists() {
        return Err(Error::MissingArtifact { path, producer: "build-models" });
    }
    Ok(PmfGroupModel::load(path)?)
}

pub fn embedder(cfg: &RunConfig, pair: ModelPair) -> Result<Embedder> {
    let (a, b) = pair.groups();
    Ok(Embedder::new(load_model(cfg, a)?, load_model(cfg, b)?, cfg.embedding.clone())?)
}

/// Embeds every manifest row against each requested pair. Pairs whose models
/// are missing are skipped when `pairs` is `None` and an error otherwise.
pub fn cmd_embed(cfg: &RunConfig, manifest: &Manifest, pairs: Option<&[ModelPair]>) -> Result<Vec<ModelPair>> {
    let bank = bank(cfg)?;
    let mut chosen = Vec::new();
    let mut embedders = Vec::new();
    for &p in pairs.unwrap_or(&ModelPair::ALL) {
        match embedder(cfg, p) {
            Ok(e) => {
                chosen.push(p);
                embedders.push(e);
            }
            Err(Error::MissingArtifact { .. }) if pairs.is_none() => info!("embed: skipping {p}, models not built"),
            Err(e) => return Err(e),
        }
    }
    if chosen.is_empty() {
        return Err(Error::MissingArtifact { path: cfg.dir("models"), producer: "build-models" });
    }
    let rows: Vec<&ManifestRow> = manifest.rows.iter().collect();
    let mut out: Vec<Vec<(Embedding, EmbeddingMeta)>> = vec![Vec::with_capacity(rows.len()); chosen.len()];
    for block in rows.chunks(block_len()) {
        let done = block
            .par_iter()
            .map(|r| {
                let pmfs = utterance_pmfs(&bank, r)?;
                embedders.iter().map(|e| Ok(e.embed(&pmfs, &r.trial_id)?)).collect::<Result<Vec<Embedding>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        for (r, es) in block.iter().zip(done) {
            for (k, e) in es.into_iter().enumerate() {
                let meta = EmbeddingMeta {
                    source_id: r.trial_id.clone(),
                    class_pair: e.class_pair.clone(),
                    gender: Some(r.gender),
                    class: Some(r.class),
                };
                out[k].push((e, meta));
            }
        }
    }
    let dir = cfg.dir("embeddings");
    std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    for (p, rows) in chosen.iter().zip(&out) {
        write_embeddings(embedding_stem(cfg, *p), rows)?;
        info!("embed: {} rows for {p}", rows.len());
    }
    Ok(chosen)
}

/// Embeddings of `pair`, checked against the manifest row order.
pub fn load_embeddings(cfg: &RunConfig, manifest: &Manifest, pair: ModelPair) -> Result<Vec<Embedding>> {
    let stem = embedding_stem(cfg, pair);
    if !stem.with_extension("bin").exists() {
        return Err(Error::MissingArtifact { path: stem.with_extension("bin"), producer: "embed" });
    }
    let rows = read_embeddings(&stem)?;
    if rows.len() != manifest.rows.len()
        || rows.iter().zip(&manifest.rows).any(|((_, m), r)| m.source_id != r.trial_id)
    {
        return Err(Error::Data(format!(
            "{}: embeddings do not match the manifest; rerun `sasv embed`",
            stem.display()
        )));
    }
    Ok(rows.into_iter().map(|(e, _)| e).collect())
}
