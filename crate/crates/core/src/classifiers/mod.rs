//! Gender recognizers and countermeasure classifiers.
//!
//! Labels follow one fixed convention per task: for countermeasures 1 is
//! bona fide and 0 is spoof, for gender 1 is male and 0 is female.
//! Every model scores higher for class 1.

pub mod dataset;
pub mod gbdt;
pub mod logreg;
pub mod mlp;
pub mod model_io;
pub mod ocsoftmax;
pub mod smote;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use dataset::{Dataset, FeatureLayout, Sample, Standardizer};
pub use gbdt::{train_gbdt, Gbdt, GbdtParams};
pub use logreg::{train_logreg, LogisticRegression, LogregParams};
pub use mlp::{train_grouped_mlp, GroupedMlp, GroupedMlpSpec, Head, MlpVariant, TrainingLog};
pub use model_io::TrainedModel;
pub use ocsoftmax::{oc_softmax_loss, OcSoftmaxParams};
pub use smote::smote_oversample;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training data contains a single class")]
    SingleClassData,
    #[error("training data is empty")]
    EmptyData,
    #[error("non-finite feature in row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("feature layout mismatch: expected {expected}, found {found}")]
    LayoutMismatch { expected: String, found: String },
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),
    #[error("minority class has {found} rows but k = {k} needs at least {}", k + 1)]
    TooFewMinoritySamples { found: usize, k: usize },
    #[error("one-class softmax margins invalid: need -1 <= m_other < m_target <= 1 and alpha > 0")]
    BadMargins,
    #[error("loss diverged at epoch {epoch}, batch {batch} (last finite loss {last_loss})")]
    DivergentLoss { epoch: usize, batch: usize, last_loss: f64 },
    #[error("model file {path}: {reason}")]
    BadModelFile { path: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// SHA-256 of a config's debug rendering, stored alongside trained weights.
pub fn config_hash<T: std::fmt::Debug>(config: &T) -> [u8; 32] {
    Sha256::digest(format!("{config:?}").as_bytes()).into()
}

/// Checks that both labels occur.
pub(crate) fn check_two_classes(data: &Dataset) -> Result<(), ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyData);
    }
    let ones = data.samples.iter().filter(|s| s.label == 1).count();
    if ones == 0 || ones == data.len() {
        return Err(ClassifierError::SingleClassData);
    }
    Ok(())
}
