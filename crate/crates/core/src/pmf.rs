//! Amplitude probability mass functions and per-class group models.
//!
//! A [`Pmf`] is a normalized histogram over [-1, 1] with `2^b` equal-width
//! bins (`b = 16` everywhere outside tests). Bin `i` covers
//! `[-1 + i·Δx, -1 + (i+1)·Δx)` with `Δx = 2 / bins`; the last bin is closed
//! at +1.

use std::fs;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::numeric::kahan_sum;

/// `2^16` bins, one per 16-bit code.
pub const PMF_BINS: usize = 1 << 16;
pub const DEFAULT_EPSILON: f64 = 1e-6;

const MODEL_MAGIC: &[u8; 4] = b"PMFM";
const MODEL_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum PmfError {
    #[error("no samples to histogram")]
    EmptyInput,
    #[error("sample {value} at index {index} lies outside [-1, 1]")]
    OutOfRangeSample { index: usize, value: f64 },
    #[error("bin count {0} is not a power of two >= 2")]
    BadBinCount(usize),
    #[error("bins do not form a distribution (sum {sum})")]
    NotNormalized { sum: f64 },
    #[error("group has no files")]
    EmptyGroup,
    #[error("expected {expected} channels, found {found}")]
    ChannelCountMismatch { expected: usize, found: usize },
    #[error("expected {expected} bins, found {found}")]
    BinCountMismatch { expected: usize, found: usize },
    #[error("smoothing epsilon {0} outside (0, 1e-3]")]
    BadEpsilon(f64),
    #[error("{path}: bad model file at byte {offset}: {reason}")]
    BadModelFile {
        path: PathBuf,
        offset: u64,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Normalized amplitude histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    bins: Vec<f64>,
    sample_count: u64,
    support: Range<usize>,
}

/// Smallest index range holding every nonzero bin.
fn support_of(bins: &[f64]) -> Range<usize> {
    match bins.iter().position(|&b| b != 0.0) {
        Some(lo) => lo..bins.iter().rposition(|&b| b != 0.0).unwrap() + 1,
        None => 0..0,
    }
}

impl Pmf {
    fn build(bins: Vec<f64>, sample_count: u64) -> Self {
        let support = support_of(&bins);
        Self { bins, sample_count, support }
    }

    /// Wraps already-normalized bins; `sample_count` is the pooling weight.
    pub fn from_bins(bins: Vec<f64>, sample_count: u64) -> Result<Self, PmfError> {
        if bins.len() < 2 || !bins.len().is_power_of_two() {
            return Err(PmfError::BadBinCount(bins.len()));
        }
        let sum = kahan_sum(bins.iter().copied());
        if bins.iter().any(|b| !(b.is_finite() && *b >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(PmfError::NotNormalized { sum });
        }
        Ok(Self::build(bins, sample_count))
    }

    /// Uniform distribution, mostly for tests and fixed-point checks.
    pub fn uniform(bin_count: usize) -> Result<Self, PmfError> {
        Self::from_bins(vec![1.0 / bin_count as f64; bin_count], 0)
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn total_mass(&self) -> f64 {
        kahan_sum(self.bins[self.support.clone()].iter().copied())
    }

    /// Index range outside which every bin is zero.
    pub fn support(&self) -> Range<usize> {
        self.support.clone()
    }
}

#[inline]
fn bin_index(x: f64, bin_count: usize) -> usize {
    let half = bin_count as f64 / 2.0;
    (((x + 1.0) * half).floor() as usize).min(bin_count - 1)
}

/// Histogram of `samples` over [-1, 1] with `2^16` bins.
pub fn compute_pmf(samples: &[f64]) -> Result<Pmf, PmfError> {
    compute_pmf_with_bins(samples, PMF_BINS)
}

/// Same as [`compute_pmf`] with a configurable (power-of-two) bin count.
pub fn compute_pmf_with_bins(samples: &[f64], bin_count: usize) -> Result<Pmf, PmfError> {
    if bin_count < 2 || !bin_count.is_power_of_two() {
        return Err(PmfError::BadBinCount(bin_count));
    }
    if samples.is_empty() {
        return Err(PmfError::EmptyInput);
    }
    let mut counts = vec![0u64; bin_count];
    for (index, &value) in samples.iter().enumerate() {
        if !(-1.0..=1.0).contains(&value) {
            return Err(PmfError::OutOfRangeSample { index, value });
        }
        counts[bin_index(value, bin_count)] += 1;
    }
    let n = samples.len() as f64;
    Ok(Pmf::build(counts.into_iter().map(|c| c as f64 / n).collect(), samples.len() as u64))
}

pub fn check_epsilon(epsilon: f64) -> Result<(), PmfError> {
    if epsilon > 0.0 && epsilon <= 1e-3 {
        Ok(())
    } else {
        Err(PmfError::BadEpsilon(epsilon))
    }
}

/// One smoothed bin; `floor` is `epsilon / bin_count`.
#[inline]
pub fn smooth_bin(b: f64, epsilon: f64, floor: f64) -> f64 {
    (1.0 - epsilon) * b + floor
}

/// `(1 - epsilon)·p + epsilon·uniform`.
pub fn smooth_for_divergence(p: &Pmf, epsilon: f64) -> Result<Pmf, PmfError> {
    check_epsilon(epsilon)?;
    let floor = epsilon / p.bins.len() as f64;
    Ok(Pmf::build(p.bins.iter().map(|&b| smooth_bin(b, epsilon, floor)).collect(), p.sample_count))
}

/// Per-channel class model built from a group of files.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfGroupModel {
    pub group_name: String,
    pub channel_pmfs: Vec<Pmf>,
    pub file_count: u64,
}

/// Streaming sample-count-weighted pooling of per-file channel PMFs.
#[derive(Debug, Clone)]
pub struct GroupAccumulator {
    group_name: String,
    channels: usize,
    bin_count: Option<usize>,
    weighted: Vec<Vec<f64>>,
    samples: Vec<u64>,
    first: Option<Vec<Pmf>>,
    file_count: u64,
}

impl GroupAccumulator {
    pub fn new(group_name: impl Into<String>, channels: usize) -> Self {
        Self {
            group_name: group_name.into(),
            channels,
            bin_count: None,
            weighted: Vec::new(),
            samples: vec![0; channels],
            first: None,
            file_count: 0,
        }
    }

    pub fn file_count(&self) -> u64 {
        self.file_count
    }

    pub fn add_file(&mut self, pmfs: &[Pmf]) -> Result<(), PmfError> {
        if pmfs.len() != self.channels {
            return Err(PmfError::ChannelCountMismatch {
                expected: self.channels,
                found: pmfs.len(),
            });
        }
        let bins = *self.bin_count.get_or_insert(pmfs[0].bin_count());
        if let Some(bad) = pmfs.iter().find(|p| p.bin_count() != bins) {
            return Err(PmfError::BinCountMismatch {
                expected: bins,
                found: bad.bin_count(),
            });
        }
        if self.weighted.is_empty() {
            self.weighted = vec![vec![0.0; bins]; self.channels];
        }
        for (c, p) in pmfs.iter().enumerate() {
            let w = p.sample_count as f64;
            for (acc, &b) in self.weighted[c].iter_mut().zip(&p.bins) {
                *acc += w * b;
            }
            self.samples[c] += p.sample_count;
        }
        if self.file_count == 0 {
            self.first = Some(pmfs.to_vec());
        } else {
            self.first = None;
        }
        self.file_count += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<PmfGroupModel, PmfError> {
        if self.file_count == 0 {
            return Err(PmfError::EmptyGroup);
        }
        let channel_pmfs = if let Some(only) = self.first {
            only
        } else {
            self.weighted
                .into_iter()
                .zip(&self.samples)
                .map(|(acc, &n)| {
                    let total = n as f64;
                    let mut bins: Vec<f64> = acc.into_iter().map(|v| v / total).collect();
                    let mass = kahan_sum(bins.iter().copied());
                    bins.iter_mut().for_each(|b| *b /= mass);
                    Pmf::build(bins, n)
                })
                .collect()
        };
        Ok(PmfGroupModel {
            group_name: self.group_name,
            channel_pmfs,
            file_count: self.file_count,
        })
    }
}

/// Pools per-file channel PMFs into a group model (weights = sample counts).
pub fn aggregate_group(
    group_name: &str,
    pmf_per_file_per_channel: &[Vec<Pmf>],
    channels: usize,
) -> Result<PmfGroupModel, PmfError> {
    let mut acc = GroupAccumulator::new(group_name, channels);
    for file in pmf_per_file_per_channel {
        acc.add_file(file)?;
    }
    acc.finish()
}

impl PmfGroupModel {
    pub fn channels(&self) -> usize {
        self.channel_pmfs.len()
    }

    pub fn bin_count(&self) -> usize {
        self.channel_pmfs.first().map_or(0, Pmf::bin_count)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let name = self.group_name.as_bytes();
        let bins = self.bin_count();
        let mut out = Vec::with_capacity(40 + name.len() + 8 * bins * self.channels());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(self.channels() as u32).to_le_bytes());
        out.extend_from_slice(&(bins as u32).to_le_bytes());
        out.extend_from_slice(&self.file_count.to_le_bytes());
        let samples = self.channel_pmfs.first().map_or(0, Pmf::sample_count);
        out.extend_from_slice(&samples.to_le_bytes());
        for p in &self.channel_pmfs {
            for b in &p.bins {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, PmfError> {
        let bad = |offset: usize, reason: &str| PmfError::BadModelFile {
            path: path.to_path_buf(),
            offset: offset as u64,
            reason: reason.to_string(),
        };
        let take = |at: usize, n: usize| -> Result<&[u8], PmfError> {
            bytes.get(at..at + n).ok_or_else(|| bad(at, "unexpected end of file"))
        };
        if take(0, 4)? != MODEL_MAGIC {
            return Err(bad(0, "missing PMFM magic"));
        }
        let version = u16::from_le_bytes(take(4, 2)?.try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(bad(4, &format!("unsupported version {version}")));
        }
        let name_len = u32::from_le_bytes(take(6, 4)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(10, name_len)?)
            .map_err(|_| bad(10, "group name is not UTF-8"))?
            .to_string();
        let mut at = 10 + name_len;
        let channels = u32::from_le_bytes(take(at, 4)?.try_into().unwrap()) as usize;
        let bins = u32::from_le_bytes(take(at + 4, 4)?.try_into().unwrap()) as usize;
        let file_count = u64::from_le_bytes(take(at + 8, 8)?.try_into().unwrap());
        let samples = u64::from_le_bytes(take(at + 16, 8)?.try_into().unwrap());
        at += 24;
        let payload = take(at, channels * bins * 8)?;
        if bytes.len() != at + payload.len() {
            return Err(bad(at + payload.len(), "trailing bytes"));
        }
        let mut channel_pmfs = Vec::with_capacity(channels);
        for (c, chunk) in payload.chunks_exact(bins * 8).enumerate() {
            let values: Vec<f64> = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            let pmf = Pmf::from_bins(values, samples)
                .map_err(|e| bad(at + c * bins * 8, &format!("channel {}: {e}", c + 1)))?;
            channel_pmfs.push(pmf);
        }
        Ok(Self {
            group_name: name,
            channel_pmfs,
            file_count,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PmfError> {
        let path = path.as_ref();
        let io = |source| PmfError::Io {
            path: path.to_path_buf(),
            source,
        };
        fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.to_bytes()))
            .map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PmfError> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|source| PmfError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        Self::from_bytes(&bytes, path)
    }

    /// CSV with columns `bin,lower_edge,ch1..chN`; rows where every channel is zero are skipped.
    pub fn to_csv(&self) -> String {
        let bins = self.bin_count();
        let mut out = String::from("bin,lower_edge");
        for c in 1..=self.channels() {
            out.push_str(&format!(",ch{c}"));
        }
        out.push('\n');
        let dx = 2.0 / bins as f64;
        for i in 0..bins {
            if self.channel_pmfs.iter().all(|p| p.bins[i] == 0.0) {
                continue;
            }
            out.push_str(&format!("{i},{}", -1.0 + i as f64 * dx));
            for p in &self.channel_pmfs {
                out.push_str(&format!(",{:e}", p.bins[i]));
            }
            out.push('\n');
        }
        out
    }
}
