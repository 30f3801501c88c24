//! 160-dimensional time embeddings, their 16-group partition, and PCA.
//!
//! Slot `(n, l)` of an embedding (channel `n`, measure `l`, both 0-based)
//! lives at index `n * 8 + l` and holds
//! `d_l(input_n, class2_n) - d_l(input_n, class1_n)`. By convention class 1
//! is genuine (or male) and class 2 is spoof (or female).

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filterbank::{CHANNELS, FILTER_PAIRS};
use crate::labels::{Gender, TrialClass};
use crate::pmf::{check_epsilon, Pmf, PmfError, PmfGroupModel, DEFAULT_EPSILON};
use crate::similarity::{measure_vector_prepared, MeasureId, QcPrepared, SimilarityConfig, SimilarityError, MEASURE_COUNT};

pub const EMBEDDING_DIM: usize = CHANNELS * MEASURE_COUNT;
pub const GROUP_COUNT: usize = 2 * MEASURE_COUNT;
pub const GROUP_WIDTH: usize = FILTER_PAIRS;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("expected {expected} channels, found {found}")]
    ChannelCountMismatch { expected: usize, found: usize },
    #[error("expected {expected} bins, found {found}")]
    BinCountMismatch { expected: usize, found: usize },
    #[error("embedding must have {EMBEDDING_DIM} finite values, got {0} values")]
    BadLength(usize),
    #[error("non-finite embedding value at slot {0}")]
    NonFinite(usize),
    #[error("PCA needs at least {needed} embeddings, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("PCA dimension must be 2 or 3, got {0}")]
    BadDims(usize),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error("{path}: {reason}")]
    BadFile { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Time embedding of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    pub class_pair: (String, String),
    pub source_id: String,
}

impl Embedding {
    pub fn new(
        values: Vec<f64>,
        class_pair: (String, String),
        source_id: impl Into<String>,
    ) -> Result<Self, EmbeddingError> {
        if values.len() != EMBEDDING_DIM {
            return Err(EmbeddingError::BadLength(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(i));
        }
        Ok(Self {
            values,
            class_pair,
            source_id: source_id.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at 0-based channel `n` and measure `id`.
    pub fn at(&self, channel: usize, id: MeasureId) -> f64 {
        self.values[slot(channel, id.ordinal())]
    }
}

#[inline]
pub fn slot(channel: usize, measure: usize) -> usize {
    channel * MEASURE_COUNT + measure
}

/// One of the 16 network input groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupKey {
    pub measure: MeasureId,
    pub inverse: bool,
}

impl GroupKey {
    pub fn index(self) -> usize {
        2 * self.measure.ordinal() + usize::from(self.inverse)
    }

    pub fn from_index(index: usize) -> Self {
        Self {
            measure: MeasureId::ALL[index / 2],
            inverse: index % 2 == 1,
        }
    }
}

/// 16 groups × 10 values, ordered by `GroupKey::index`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedEmbedding {
    pub groups: [[f64; GROUP_WIDTH]; GROUP_COUNT],
}

impl GroupedEmbedding {
    pub fn group(&self, key: GroupKey) -> &[f64; GROUP_WIDTH] {
        &self.groups[key.index()]
    }

    /// Group-major flat vector (`group * 10 + i`), the layout the CM networks consume.
    pub fn to_group_major(&self) -> Vec<f64> {
        self.groups.iter().flatten().copied().collect()
    }

    /// Inverse of [`regroup`], back to channel-major order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = vec![0.0; EMBEDDING_DIM];
        for (g, values) in self.groups.iter().enumerate() {
            let key = GroupKey::from_index(g);
            let offset = if key.inverse { FILTER_PAIRS } else { 0 };
            for (i, &v) in values.iter().enumerate() {
                out[slot(offset + i, key.measure.ordinal())] = v;
            }
        }
        out
    }
}

/// Partitions by (measure, filter kind): Gammatone channels 1-10 and inverse channels 11-20.
pub fn regroup(e: &Embedding) -> GroupedEmbedding {
    regroup_values(&e.values)
}

pub fn regroup_values(values: &[f64]) -> GroupedEmbedding {
    let mut groups = [[0.0; GROUP_WIDTH]; GROUP_COUNT];
    for (g, out) in groups.iter_mut().enumerate() {
        let key = GroupKey::from_index(g);
        let offset = if key.inverse { FILTER_PAIRS } else { 0 };
        for (i, v) in out.iter_mut().enumerate() {
            *v = values[slot(offset + i, key.measure.ordinal())];
        }
    }
    GroupedEmbedding { groups }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub epsilon: f64,
    pub similarity: SimilarityConfig,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            similarity: SimilarityConfig::default(),
        }
    }
}

/// A validated model pair, reused across utterances.
#[derive(Debug, Clone)]
pub struct Embedder {
    class1: PmfGroupModel,
    class2: PmfGroupModel,
    prepared1: Vec<QcPrepared>,
    prepared2: Vec<QcPrepared>,
    config: EmbedConfig,
}

impl Embedder {
    pub fn new(
        class1: PmfGroupModel,
        class2: PmfGroupModel,
        config: EmbedConfig,
    ) -> Result<Self, EmbeddingError> {
        config.similarity.validate()?;
        for m in [&class1, &class2] {
            if m.channels() != CHANNELS {
                return Err(EmbeddingError::ChannelCountMismatch {
                    expected: CHANNELS,
                    found: m.channels(),
                });
            }
        }
        if class1.bin_count() != class2.bin_count() {
            return Err(EmbeddingError::BinCountMismatch {
                expected: class1.bin_count(),
                found: class2.bin_count(),
            });
        }
        check_epsilon(config.epsilon)?;
        let prepare = |m: &PmfGroupModel| -> Vec<QcPrepared> {
            m.channel_pmfs.iter().map(|p| QcPrepared::new(p, &config.similarity)).collect()
        };
        let (prepared1, prepared2) = (prepare(&class1), prepare(&class2));
        Ok(Self {
            class1,
            class2,
            prepared1,
            prepared2,
            config,
        })
    }

    pub fn class_pair(&self) -> (String, String) {
        (self.class1.group_name.clone(), self.class2.group_name.clone())
    }

    pub fn bin_count(&self) -> usize {
        self.class1.bin_count()
    }

    pub fn embed(&self, input: &[Pmf], source_id: &str) -> Result<Embedding, EmbeddingError> {
        if input.len() != CHANNELS {
            return Err(EmbeddingError::ChannelCountMismatch {
                expected: CHANNELS,
                found: input.len(),
            });
        }
        if let Some(bad) = input.iter().find(|p| p.bin_count() != self.bin_count()) {
            return Err(EmbeddingError::BinCountMismatch {
                expected: self.bin_count(),
                found: bad.bin_count(),
            });
        }
        let (eps, sim) = (self.config.epsilon, &self.config.similarity);
        let mut values = vec![0.0; EMBEDDING_DIM];
        for (n, x) in input.iter().enumerate() {
            let xp = QcPrepared::new(x, sim);
            let to1 = measure_vector_prepared(x, &xp, &self.class1.channel_pmfs[n], &self.prepared1[n], eps, sim)?;
            let to2 = measure_vector_prepared(x, &xp, &self.class2.channel_pmfs[n], &self.prepared2[n], eps, sim)?;
            for l in 0..MEASURE_COUNT {
                values[slot(n, l)] = to2[l] - to1[l];
            }
        }
        Embedding::new(values, self.class_pair(), source_id)
    }
}

/// One-shot embedding; prefer [`Embedder`] when scoring many utterances.
pub fn embed(
    input_pmfs: &[Pmf],
    model1: &PmfGroupModel,
    model2: &PmfGroupModel,
    config: &EmbedConfig,
    source_id: &str,
) -> Result<Embedding, EmbeddingError> {
    Embedder::new(model1.clone(), model2.clone(), config.clone())?.embed(input_pmfs, source_id)
}

/// Sidecar metadata for one embedding row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub source_id: String,
    pub class_pair: (String, String),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<TrialClass>,
}

/// Writes `<stem>.bin` (little-endian f64 rows of 160) and `<stem>.jsonl`.
pub fn write_embeddings(
    stem: impl AsRef<Path>,
    rows: &[(Embedding, EmbeddingMeta)],
) -> Result<(), EmbeddingError> {
    let stem = stem.as_ref();
    let bin_path = stem.with_extension("bin");
    let json_path = stem.with_extension("jsonl");
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EmbeddingError::Io { path, source }
    };
    let mut bin = BufWriter::new(fs::File::create(&bin_path).map_err(io(&bin_path))?);
    let mut json = BufWriter::new(fs::File::create(&json_path).map_err(io(&json_path))?);
    for (e, meta) in rows {
        for v in e.values() {
            bin.write_all(&v.to_le_bytes()).map_err(io(&bin_path))?;
        }
        let line = serde_json::to_string(meta).expect("metadata serializes");
        writeln!(json, "{line}").map_err(io(&json_path))?;
    }
    bin.flush().map_err(io(&bin_path))?;
    json.flush().map_err(io(&json_path))?;
    Ok(())
}

pub fn read_embeddings(stem: impl AsRef<Path>) -> Result<Vec<(Embedding, EmbeddingMeta)>, EmbeddingError> {
    let stem = stem.as_ref();
    let bin_path = stem.with_extension("bin");
    let json_path = stem.with_extension("jsonl");
    let bytes = fs::read(&bin_path).map_err(|source| EmbeddingError::Io {
        path: bin_path.clone(),
        source,
    })?;
    let row_bytes = EMBEDDING_DIM * 8;
    if bytes.len() % row_bytes != 0 {
        return Err(EmbeddingError::BadFile {
            path: bin_path,
            reason: format!("size {} is not a multiple of {row_bytes}", bytes.len()),
        });
    }
    let file = fs::File::open(&json_path).map_err(|source| EmbeddingError::Io {
        path: json_path.clone(),
        source,
    })?;
    let mut metas = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| EmbeddingError::Io {
            path: json_path.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let meta: EmbeddingMeta = serde_json::from_str(&line).map_err(|e| EmbeddingError::BadFile {
            path: json_path.clone(),
            reason: format!("line {}: {e}", i + 1),
        })?;
        metas.push(meta);
    }
    if metas.len() * row_bytes != bytes.len() {
        return Err(EmbeddingError::BadFile {
            path: json_path,
            reason: format!("{} sidecar rows for {} embeddings", metas.len(), bytes.len() / row_bytes),
        });
    }
    bytes
        .chunks_exact(row_bytes)
        .zip(metas)
        .map(|(chunk, meta)| {
            let values = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            let e = Embedding::new(values, meta.class_pair.clone(), meta.source_id.clone())?;
            Ok((e, meta))
        })
        .collect()
}

/// PCA of a set of embeddings.
#[derive(Debug, Clone)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// Unit basis vectors, by descending eigenvalue.
    pub basis: Vec<Vec<f64>>,
    /// Covariance eigenvalues (divisor `n - 1`) for the returned components.
    pub eigenvalues: Vec<f64>,
    /// Share of total variance carried by each returned component.
    pub explained_variance_ratio: Vec<f64>,
    pub projections: Vec<Vec<f64>>,
    /// Set when the data has fewer than `dims` non-degenerate directions.
    pub degenerate: bool,
    /// Sum of eigenvalues beyond the returned components.
    pub trailing_variance: f64,
}

pub fn pca_project(embeddings: &[Embedding], dims: usize) -> Result<PcaProjection, EmbeddingError> {
    let rows: Vec<&[f64]> = embeddings.iter().map(Embedding::values).collect();
    pca_project_rows(&rows, dims)
}

/// PCA over arbitrary equal-length rows.
pub fn pca_project_rows(rows: &[&[f64]], dims: usize) -> Result<PcaProjection, EmbeddingError> {
    if !(2..=3).contains(&dims) {
        return Err(EmbeddingError::BadDims(dims));
    }
    if rows.len() < dims + 1 {
        return Err(EmbeddingError::TooFewPoints {
            needed: dims + 1,
            got: rows.len(),
        });
    }
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let cov = (centred.transpose() * &centred) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut basis = Vec::with_capacity(dims);
    let mut eigenvalues = Vec::with_capacity(dims);
    let mut degenerate = false;
    for &k in order.iter().take(dims) {
        let lambda = eig.eigenvalues[k].max(0.0);
        if lambda <= 1e-12 * scale {
            degenerate = true;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let pivot = v.iter().fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        basis.push(v);
        eigenvalues.push(lambda);
    }
    let trailing_variance = order
        .iter()
        .skip(dims)
        .map(|&k| eig.eigenvalues[k].max(0.0))
        .sum();
    let explained_variance_ratio = eigenvalues
        .iter()
        .map(|l| if total > 0.0 { l / total } else { 0.0 })
        .collect();
    let projections = (0..n)
        .map(|i| {
            basis
                .iter()
                .map(|b| (0..d).map(|j| centred[(i, j)] * b[j]).sum())
                .collect()
        })
        .collect();
    if degenerate {
        log::warn!("PCA: covariance rank below {dims}; trailing components carry no variance");
    }
    Ok(PcaProjection {
        mean,
        basis,
        eigenvalues,
        explained_variance_ratio,
        projections,
        degenerate,
        trailing_variance,
    })
}

impl PcaProjection {
    /// CSV with columns `source_id,label,pc1..pcK`.
    pub fn to_csv(&self, ids: &[String], labels: &[String]) -> String {
        let mut out = String::from("source_id,label");
        for k in 1..=self.basis.len() {
            out.push_str(&format!(",pc{k}"));
        }
        out.push('\n');
        for ((id, label), p) in ids.iter().zip(labels).zip(&self.projections) {
            out.push_str(id);
            out.push(',');
            out.push_str(label);
            for v in p {
                out.push_str(&format!(",{v:.9e}"));
            }
            out.push('\n');
        }
        out
    }
}
