//! `TrainedModel` and its binary file format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "SASV"  kind:u8  version:u16  config_sha256:[u8; 32]
//! layout_tag:u8  layout_a:u32  layout_b:u32
//! meta_count:u32  meta:[u32]
//! param_count:u64  params:[f64]
//! ```

use std::fs;
use std::path::Path;

use super::dataset::Standardizer;
use super::gbdt::Gbdt;
use super::logreg::LogisticRegression;
use super::mlp::{GroupedMlp, GroupedMlpSpec, Head, MlpVariant};
use super::ocsoftmax::OcSoftmaxParams;
use super::{ClassifierError, FeatureLayout};

const MAGIC: &[u8; 4] = b"SASV";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    LogisticRegression(LogisticRegression),
    Gbdt(Gbdt),
    GroupedMlp(GroupedMlp),
}

impl TrainedModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedModel::LogisticRegression(_) => "logistic_regression",
            TrainedModel::Gbdt(_) => "gbdt",
            TrainedModel::GroupedMlp(_) => "grouped_mlp",
        }
    }

    pub fn layout(&self) -> FeatureLayout {
        match self {
            TrainedModel::LogisticRegression(m) => m.layout,
            TrainedModel::Gbdt(m) => m.layout,
            TrainedModel::GroupedMlp(m) => m.layout(),
        }
    }

    /// Higher means more class 1 (bona fide or male).
    pub fn score(&self, row: &[f64]) -> Result<f64, ClassifierError> {
        let layout = self.layout();
        if row.len() != layout.dim() {
            return Err(ClassifierError::LayoutMismatch {
                expected: layout.to_string(),
                found: format!("{} values", row.len()),
            });
        }
        Ok(match self {
            TrainedModel::LogisticRegression(m) => m.predict(row),
            TrainedModel::Gbdt(m) => m.predict(row),
            TrainedModel::GroupedMlp(m) => m.score(row)?,
        })
    }

    /// Whether scores live in [-1, 1] rather than [0, 1].
    pub fn symmetric_scores(&self) -> bool {
        matches!(self, TrainedModel::GroupedMlp(m) if m.spec.head == Head::OneClassSoftmax)
    }

    fn encode(&self) -> (u8, Vec<u32>, Vec<f64>) {
        match self {
            TrainedModel::LogisticRegression(m) => {
                let mut p = m.standardizer.to_params();
                p.extend(&m.weights);
                p.push(m.bias);
                (0, Vec::new(), p)
            }
            TrainedModel::Gbdt(m) => (1, Vec::new(), m.to_params()),
            TrainedModel::GroupedMlp(m) => {
                let s = &m.spec;
                let variant = match s.variant {
                    MlpVariant::Male => 0,
                    MlpVariant::Female => 1,
                    MlpVariant::GenderIndependent => 2,
                };
                let head = match s.head {
                    Head::Sigmoid => 0,
                    Head::OneClassSoftmax => 1,
                };
                let meta = vec![
                    variant,
                    s.group_width as u32,
                    s.merge_width as u32,
                    s.output_width as u32,
                    u32::from(s.residual),
                    head,
                    s.batch_size as u32,
                    s.epochs as u32,
                    (s.seed >> 32) as u32,
                    s.seed as u32,
                ];
                let mut p = vec![
                    s.dropout,
                    s.learning_rate,
                    s.lr_decay_at,
                    s.lr_decay,
                    s.ocs.alpha,
                    s.ocs.m_target,
                    s.ocs.m_other,
                ];
                p.extend(m.standardizer.to_params());
                p.extend(&m.params);
                (2, meta, p)
            }
        }
    }

    pub fn to_bytes(&self, config_hash: &[u8; 32]) -> Vec<u8> {
        let (kind, meta, params) = self.encode();
        let (tag, a, b) = self.layout().tag();
        let mut out = Vec::with_capacity(64 + 4 * meta.len() + 8 * params.len());
        out.extend_from_slice(MAGIC);
        out.push(kind);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(config_hash);
        out.push(tag);
        out.extend_from_slice(&a.to_le_bytes());
        out.extend_from_slice(&b.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        for m in &meta {
            out.extend_from_slice(&m.to_le_bytes());
        }
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for p in &params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    /// Parses a model file, returning the model and its stored config hash.
    pub fn from_bytes(bytes: &[u8], path: &str) -> Result<(Self, [u8; 32]), ClassifierError> {
        let bad = |reason: String| ClassifierError::BadModelFile { path: path.to_string(), reason };
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).ok_or_else(|| bad("truncated header".into()))? != MAGIC {
            return Err(bad("bad magic".into()));
        }
        let kind = r.u8().ok_or_else(|| bad("truncated header".into()))?;
        let version = r.u16().ok_or_else(|| bad("truncated header".into()))?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let hash: [u8; 32] = r.take(32).ok_or_else(|| bad("truncated hash".into()))?.try_into().unwrap();
        let trunc = || bad(format!("truncated at byte {}", bytes.len()));
        let tag = r.u8().ok_or_else(trunc)?;
        let a = r.u32().ok_or_else(trunc)? as usize;
        let b = r.u32().ok_or_else(trunc)? as usize;
        let layout = match tag {
            0 => FeatureLayout::Flat(a),
            1 => FeatureLayout::Grouped { groups: a, width: b },
            t => return Err(bad(format!("unknown layout tag {t}"))),
        };
        let n_meta = r.u32().ok_or_else(trunc)? as usize;
        let meta: Vec<u32> = (0..n_meta).map(|_| r.u32()).collect::<Option<_>>().ok_or_else(trunc)?;
        let n_params = r.u64().ok_or_else(trunc)? as usize;
        if n_params > bytes.len() / 8 {
            return Err(trunc());
        }
        let params: Vec<f64> = (0..n_params).map(|_| r.f64()).collect::<Option<_>>().ok_or_else(trunc)?;
        if r.pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let d = layout.dim();
        let model = match kind {
            0 => {
                if params.len() != 3 * d + 1 {
                    return Err(bad("parameter count does not match layout".into()));
                }
                TrainedModel::LogisticRegression(LogisticRegression {
                    layout,
                    standardizer: Standardizer::from_params(&params[..2 * d]),
                    weights: params[2 * d..3 * d].to_vec(),
                    bias: params[3 * d],
                })
            }
            1 => TrainedModel::Gbdt(Gbdt::from_params(layout, &params).ok_or_else(|| bad("malformed tree block".into()))?),
            2 => {
                if meta.len() != 10 || params.len() < 7 + 2 * d || layout != FeatureLayout::EMBEDDING_GROUPS {
                    return Err(bad("malformed network header".into()));
                }
                let variant = match meta[0] {
                    0 => MlpVariant::Male,
                    1 => MlpVariant::Female,
                    2 => MlpVariant::GenderIndependent,
                    v => return Err(bad(format!("unknown variant {v}"))),
                };
                let head = if meta[5] == 0 { Head::Sigmoid } else { Head::OneClassSoftmax };
                let spec = GroupedMlpSpec {
                    variant,
                    group_width: meta[1] as usize,
                    merge_width: meta[2] as usize,
                    output_width: meta[3] as usize,
                    residual: meta[4] != 0,
                    head,
                    batch_size: meta[6] as usize,
                    epochs: meta[7] as usize,
                    seed: (u64::from(meta[8]) << 32) | u64::from(meta[9]),
                    dropout: params[0],
                    learning_rate: params[1],
                    lr_decay_at: params[2],
                    lr_decay: params[3],
                    ocs: OcSoftmaxParams { alpha: params[4], m_target: params[5], m_other: params[6] },
                };
                spec.validate()?;
                let weights = params[7 + 2 * d..].to_vec();
                if weights.len() != spec.offsets().total {
                    return Err(bad("weight count does not match network shape".into()));
                }
                TrainedModel::GroupedMlp(GroupedMlp {
                    spec,
                    standardizer: Standardizer::from_params(&params[7..7 + 2 * d]),
                    params: weights,
                })
            }
            k => return Err(bad(format!("unknown model kind {k}"))),
        };
        Ok((model, hash))
    }

    pub fn save(&self, path: impl AsRef<Path>, config_hash: &[u8; 32]) -> Result<(), ClassifierError> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes(config_hash)).map_err(|source| ClassifierError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, [u8; 32]), ClassifierError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| ClassifierError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }
    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }
    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes(b.try_into().unwrap()))
    }
    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
    fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{config_hash, train_gbdt, train_grouped_mlp, train_logreg, Dataset, GbdtParams, LogregParams, Sample};
    use crate::labels::Gender;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use sha2::{Digest, Sha256};

    fn random_data(layout: FeatureLayout, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let features = (0..layout.dim()).map(|_| rng.random_range(-1.0..1.0) + label as f64 * 0.5).collect();
                Sample { features, label, gender: Gender::Male, source_id: i.to_string() }
            })
            .collect();
        Dataset::from_samples(layout, samples).unwrap()
    }

    fn round_trip(model: TrainedModel, data: &Dataset) {
        let hash = config_hash(&"test");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.sasv");
        model.save(&path, &hash).unwrap();
        let (back, h) = TrainedModel::load(&path).unwrap();
        assert_eq!(h, hash);
        assert_eq!(back, model);
        for s in &data.samples {
            assert_eq!(back.score(&s.features).unwrap().to_bits(), model.score(&s.features).unwrap().to_bits());
        }
    }

    #[test]
    fn logreg_round_trip() {
        let data = random_data(FeatureLayout::Flat(6), 40, 1);
        round_trip(TrainedModel::LogisticRegression(train_logreg(&data, &LogregParams::default()).unwrap()), &data);
    }

    #[test]
    fn gbdt_round_trip() {
        let data = random_data(FeatureLayout::Flat(3), 60, 2);
        let p = GbdtParams { n_trees: 8, ..GbdtParams::default() };
        round_trip(TrainedModel::Gbdt(train_gbdt(&data, &p).unwrap()), &data);
    }

    #[test]
    fn mlp_round_trip_and_digest() {
        let data = random_data(FeatureLayout::EMBEDDING_GROUPS, 48, 3);
        let spec = GroupedMlpSpec { epochs: 2, batch_size: 16, ..GroupedMlpSpec::female() };
        let digest = || {
            let (m, _) = train_grouped_mlp(&data, &spec, None).unwrap();
            let bytes = TrainedModel::GroupedMlp(m).to_bytes(&config_hash(&spec));
            Sha256::digest(bytes)
        };
        assert_eq!(digest(), digest());
        let (m, _) = train_grouped_mlp(&data, &spec, None).unwrap();
        round_trip(TrainedModel::GroupedMlp(m), &data);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let data = random_data(FeatureLayout::Flat(2), 10, 4);
        let m = TrainedModel::LogisticRegression(train_logreg(&data, &LogregParams::default()).unwrap());
        let bytes = m.to_bytes(&[0; 32]);
        assert!(TrainedModel::from_bytes(&bytes[..bytes.len() - 3], "x").is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(TrainedModel::from_bytes(&wrong, "x").is_err());
        assert!(matches!(m.score(&[1.0]), Err(ClassifierError::LayoutMismatch { .. })));
    }
}
