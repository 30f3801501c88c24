use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::embedding::{regroup_values, Embedding, EMBEDDING_DIM, GROUP_COUNT, GROUP_WIDTH};
use crate::labels::Gender;

/// How a feature row is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureLayout {
    /// Plain vector, e.g. a channel-major embedding or a score pair.
    Flat(usize),
    /// Group-major blocks of `width` values.
    Grouped { groups: usize, width: usize },
}

impl FeatureLayout {
    pub const EMBEDDING_GROUPS: FeatureLayout = FeatureLayout::Grouped {
        groups: GROUP_COUNT,
        width: GROUP_WIDTH,
    };

    pub fn dim(self) -> usize {
        match self {
            FeatureLayout::Flat(d) => d,
            FeatureLayout::Grouped { groups, width } => groups * width,
        }
    }

    pub(crate) fn tag(self) -> (u8, u32, u32) {
        match self {
            FeatureLayout::Flat(d) => (0, d as u32, 0),
            FeatureLayout::Grouped { groups, width } => (1, groups as u32, width as u32),
        }
    }
}

impl std::fmt::Display for FeatureLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureLayout::Flat(d) => write!(f, "flat[{d}]"),
            FeatureLayout::Grouped { groups, width } => write!(f, "grouped[{groups}x{width}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: u8,
    pub gender: Gender,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub layout: FeatureLayout,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(layout: FeatureLayout) -> Self {
        Self {
            layout,
            samples: Vec::new(),
        }
    }

    /// Builds a dataset and checks every row against the layout.
    pub fn from_samples(layout: FeatureLayout, samples: Vec<Sample>) -> Result<Self, ClassifierError> {
        let ds = Self { layout, samples };
        ds.validate()?;
        Ok(ds)
    }

    pub fn push(&mut self, sample: Sample) -> Result<(), ClassifierError> {
        check_row(self.layout, &sample.features, self.samples.len())?;
        if sample.label > 1 {
            return Err(ClassifierError::InvalidParameter(format!("label {} is not 0/1", sample.label)));
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        for (i, s) in self.samples.iter().enumerate() {
            check_row(self.layout, &s.features, i)?;
            if s.label > 1 {
                return Err(ClassifierError::InvalidParameter(format!("label {} is not 0/1", s.label)));
            }
        }
        Ok(())
    }

    /// Rows built from channel-major embeddings, kept channel-major.
    pub fn flat_from_embeddings<'a>(
        rows: impl IntoIterator<Item = (&'a Embedding, u8, Gender)>,
    ) -> Result<Self, ClassifierError> {
        let samples = rows
            .into_iter()
            .map(|(e, label, gender)| Sample {
                features: e.values().to_vec(),
                label,
                gender,
                source_id: e.source_id.clone(),
            })
            .collect();
        Self::from_samples(FeatureLayout::Flat(EMBEDDING_DIM), samples)
    }

    /// Rows built from embeddings, regrouped into the 16 × 10 network layout.
    pub fn grouped_from_embeddings<'a>(
        rows: impl IntoIterator<Item = (&'a Embedding, u8, Gender)>,
    ) -> Result<Self, ClassifierError> {
        let samples = rows
            .into_iter()
            .map(|(e, label, gender)| Sample {
                features: regroup_values(e.values()).to_group_major(),
                label,
                gender,
                source_id: e.source_id.clone(),
            })
            .collect();
        Self::from_samples(FeatureLayout::EMBEDDING_GROUPS, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.features.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| f64::from(s.label)).collect()
    }

    pub fn filter(&self, keep: impl Fn(&Sample) -> bool) -> Dataset {
        Dataset {
            layout: self.layout,
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
        }
    }
}

fn check_row(layout: FeatureLayout, row: &[f64], index: usize) -> Result<(), ClassifierError> {
    if row.len() != layout.dim() {
        return Err(ClassifierError::LayoutMismatch {
            expected: layout.to_string(),
            found: format!("row {index} with {} values", row.len()),
        });
    }
    if let Some(col) = row.iter().position(|v| !v.is_finite()) {
        return Err(ClassifierError::NonFiniteFeature { row: index, col });
    }
    Ok(())
}

/// Per-feature z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub(crate) fn to_params(&self) -> Vec<f64> {
        self.mean.iter().chain(&self.scale).copied().collect()
    }

    pub(crate) fn from_params(params: &[f64]) -> Self {
        let d = params.len() / 2;
        Self {
            mean: params[..d].to_vec(),
            scale: params[d..].to_vec(),
        }
    }
}
