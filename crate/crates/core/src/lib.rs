//! Time-domain PMF embeddings for spoofing-robust speaker verification.
//!
//! The pipeline filters 16 kHz audio through 10 Gammatone and 10 inverse
//! Gammatone channels, builds 2^16-bin amplitude histograms per channel,
//! and compares them against class models with eight similarity measures
//! to obtain a 160-dimensional embedding. Gender recognizers and
//! countermeasure networks are trained on those embeddings and evaluated
//! with EER, DCF, t-DCF and a-DCF.

pub mod audio_io;
pub mod classifiers;
pub mod embedding;
pub mod error;
pub mod filterbank;
pub mod fusion;
pub mod labels;
pub mod metrics;
pub mod numeric;
pub mod pipeline;
pub mod pmf;
pub mod similarity;
