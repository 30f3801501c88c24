//! Crate-level error with process exit codes.

use std::path::PathBuf;

use thiserror::Error;

use crate::audio_io::AudioError;
use crate::classifiers::ClassifierError;
use crate::embedding::EmbeddingError;
use crate::filterbank::FilterBankError;
use crate::fusion::FusionError;
use crate::metrics::MetricsError;
use crate::pmf::PmfError;
use crate::similarity::SimilarityError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: missing; run `sasv {producer}` first")]
    MissingArtifact { path: PathBuf, producer: &'static str },
    #[error("data: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    FilterBank(#[from] FilterBankError),
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

pub type Result<T> = std::result::Result<T, Error>;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

fn classifier_code(e: &ClassifierError) -> i32 {
    match e {
        ClassifierError::InvalidParameter(_) | ClassifierError::BadMargins => EXIT_CONFIG,
        ClassifierError::DivergentLoss { .. } => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn metrics_code(e: &MetricsError) -> i32 {
    match e {
        MetricsError::BadCostModel(_) | MetricsError::BadBootstrap(_) => EXIT_CONFIG,
        MetricsError::NegativeC1(_) | MetricsError::ZeroDefaultCost(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

impl Error {
    /// 2 for configuration errors, 3 for data errors, 4 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => EXIT_CONFIG,
            Error::FilterBank(e) => match e {
                FilterBankError::SampleRateMismatch { .. } | FilterBankError::BadChannelIndex(_) => EXIT_DATA,
                _ => EXIT_CONFIG,
            },
            Error::Pmf(PmfError::BadEpsilon(_) | PmfError::BadBinCount(_)) => EXIT_CONFIG,
            Error::Similarity(SimilarityError::InvalidConfig(_)) => EXIT_CONFIG,
            Error::Embedding(EmbeddingError::Similarity(SimilarityError::InvalidConfig(_))) => EXIT_CONFIG,
            Error::Embedding(EmbeddingError::Pmf(PmfError::BadEpsilon(_))) => EXIT_CONFIG,
            Error::Embedding(EmbeddingError::BadDims(_)) => EXIT_CONFIG,
            Error::Embedding(EmbeddingError::NonFinite(_)) => EXIT_NUMERIC,
            Error::Classifier(e) => classifier_code(e),
            Error::Metrics(e) => metrics_code(e),
            Error::Fusion(e) => match e {
                FusionError::BadAlpha(_) | FusionError::BadGridStep(_) => EXIT_CONFIG,
                FusionError::Metrics(m) => metrics_code(m),
                FusionError::Classifier(c) => classifier_code(c),
                FusionError::OutOfDeclaredRange { .. } => EXIT_DATA,
            },
            _ => EXIT_DATA,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
