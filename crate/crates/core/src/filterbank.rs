//! Gammatone and inverse-Gammatone analysis filters.
//!
//! The bank holds `n_pairs` Gammatone channels followed by the same number of
//! inverse channels. Gammatone channels are all-pole cascades of identical
//! resonator sections; each inverse channel is a minimum-phase FIR whose
//! magnitude is the power complement of its Gammatone partner, so that
//! `|H_g|^2 + |H_inv|^2 ≈ 1`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioBuffer;

/// Number of Gammatone/inverse pairs the embedding layout is built around.
pub const FILTER_PAIRS: usize = 10;
/// Total channel count `N`.
pub const CHANNELS: usize = 2 * FILTER_PAIRS;

const DESIGN_FFT_LEN: usize = 8192;
const NOTCH_FLOOR: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum FilterBankError {
    #[error("invalid centre-frequency range [{min_hz}, {max_hz}] for sample rate {sample_rate_hz} Hz")]
    InvalidFrequencyRange {
        min_hz: f64,
        max_hz: f64,
        sample_rate_hz: u32,
    },
    #[error("sample rate {0} Hz is below the 8000 Hz minimum")]
    SampleRateTooLow(u32),
    #[error("invalid filter-bank configuration: {0}")]
    InvalidConfig(String),
    #[error("audio sampled at {audio} Hz, bank designed for {bank} Hz")]
    SampleRateMismatch { bank: u32, audio: u32 },
    #[error("channel index {0} outside 1..={CHANNELS}")]
    BadChannelIndex(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterBankConfig {
    pub min_cf_hz: f64,
    pub max_cf_hz: f64,
    pub n_pairs: usize,
    pub order: usize,
    pub fir_taps: usize,
}

impl Default for FilterBankConfig {
    fn default() -> Self {
        Self {
            min_cf_hz: 100.0,
            max_cf_hz: 7000.0,
            n_pairs: FILTER_PAIRS,
            order: 4,
            fir_taps: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterKind {
    Gammatone,
    InverseGammatone,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    /// `gain / prod_k (1 + a1 z^-1 + a2 z^-2)`, one `[a1, a2]` per section.
    AllPole { gain: f64, sections: Vec<[f64; 2]> },
    Fir { taps: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub center_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub order: usize,
    pub coefficients: Coefficients,
}

/// Glasberg & Moore equivalent rectangular bandwidth in Hz.
pub fn erb_hz(freq_hz: f64) -> f64 {
    24.7 * (4.37 * freq_hz / 1000.0 + 1.0)
}

/// ERB-rate (number of ERBs below `freq_hz`).
pub fn erb_rate(freq_hz: f64) -> f64 {
    21.4 * (4.37 * freq_hz / 1000.0 + 1.0).log10()
}

pub fn erb_rate_to_hz(rate: f64) -> f64 {
    (10f64.powf(rate / 21.4) - 1.0) * 1000.0 / 4.37
}

/// `count` centre frequencies equally spaced on the ERB-rate scale, inclusive.
pub fn erb_space(min_hz: f64, max_hz: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![min_hz];
    }
    let lo = erb_rate(min_hz);
    let hi = erb_rate(max_hz);
    (0..count)
        .map(|i| erb_rate_to_hz(lo + (hi - lo) * i as f64 / (count - 1) as f64))
        .collect()
}

impl FilterSpec {
    /// Complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, sample_rate_hz: u32) -> Complex<f64> {
        let w = 2.0 * PI * freq_hz / f64::from(sample_rate_hz);
        let z1 = Complex::from_polar(1.0, -w);
        match &self.coefficients {
            Coefficients::AllPole { gain, sections } => {
                let z2 = z1 * z1;
                sections.iter().fold(Complex::new(*gain, 0.0), |acc, [a1, a2]| {
                    acc / (Complex::new(1.0, 0.0) + z1 * *a1 + z2 * *a2)
                })
            }
            Coefficients::Fir { taps } => {
                let mut acc = Complex::new(0.0, 0.0);
                let mut zn = Complex::new(1.0, 0.0);
                for &t in taps {
                    acc += zn * t;
                    zn *= z1;
                }
                acc
            }
        }
    }

    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: u32) -> f64 {
        self.response(freq_hz, sample_rate_hz).norm()
    }

    /// First `len` samples of the impulse response.
    pub fn impulse_response(&self, len: usize) -> Vec<f64> {
        let mut impulse = vec![0.0; len];
        if len > 0 {
            impulse[0] = 1.0;
        }
        self.filter(&impulse)
    }

    /// Causal single-pass filtering; output has the input's length.
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        match &self.coefficients {
            Coefficients::AllPole { gain, sections } => {
                let mut y: Vec<f64> = input.iter().map(|x| x * gain).collect();
                for &[a1, a2] in sections {
                    let (mut y1, mut y2) = (0.0, 0.0);
                    for v in y.iter_mut() {
                        let out = *v - a1 * y1 - a2 * y2;
                        y2 = y1;
                        y1 = out;
                        *v = out;
                    }
                }
                y
            }
            Coefficients::Fir { taps } => fft_convolve(input, taps),
        }
    }
}

fn fft_convolve(input: &[f64], taps: &[f64]) -> Vec<f64> {
    if input.is_empty() {
        return Vec::new();
    }
    let full = input.len() + taps.len() - 1;
    let n = full.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex<f64>> = input.iter().map(|&x| Complex::new(x, 0.0)).collect();
    a.resize(n, Complex::new(0.0, 0.0));
    let mut b: Vec<Complex<f64>> = taps.iter().map(|&x| Complex::new(x, 0.0)).collect();
    b.resize(n, Complex::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a[..input.len()].iter().map(|c| c.re * scale).collect()
}

/// Minimum-phase FIR approximating a target magnitude (homomorphic method).
///
/// `magnitude` is sampled on the full FFT grid `k * fs / len`, `k = 0..len`,
/// and must be conjugate-symmetric (`magnitude[k] == magnitude[len - k]`).
pub fn minimum_phase_fir(magnitude: &[f64], taps: usize) -> Vec<f64> {
    let n = magnitude.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut cep: Vec<Complex<f64>> = magnitude
        .iter()
        .map(|&m| Complex::new(m.max(f64::MIN_POSITIVE).ln(), 0.0))
        .collect();
    inv.process(&mut cep);
    let scale = 1.0 / n as f64;
    let half = n / 2;
    let mut folded = vec![Complex::new(0.0, 0.0); n];
    folded[0] = Complex::new(cep[0].re * scale, 0.0);
    for k in 1..half {
        folded[k] = Complex::new(2.0 * cep[k].re * scale, 0.0);
    }
    folded[half] = Complex::new(cep[half].re * scale, 0.0);

    fwd.process(&mut folded);
    let mut spec: Vec<Complex<f64>> = folded.iter().map(|c| c.exp()).collect();
    inv.process(&mut spec);
    spec.iter().take(taps).map(|c| c.re * scale).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    channels: Vec<FilterSpec>,
    sample_rate_hz: u32,
}

/// Designs the Gammatone / inverse-Gammatone bank.
pub fn design_bank(
    sample_rate_hz: u32,
    config: &FilterBankConfig,
) -> Result<FilterBank, FilterBankError> {
    if sample_rate_hz < 8000 {
        return Err(FilterBankError::SampleRateTooLow(sample_rate_hz));
    }
    let nyquist = f64::from(sample_rate_hz) / 2.0;
    let FilterBankConfig {
        min_cf_hz,
        max_cf_hz,
        n_pairs,
        order,
        fir_taps,
    } = *config;
    if !(min_cf_hz > 0.0 && min_cf_hz < max_cf_hz && max_cf_hz < nyquist) {
        return Err(FilterBankError::InvalidFrequencyRange {
            min_hz: min_cf_hz,
            max_hz: max_cf_hz,
            sample_rate_hz,
        });
    }
    if n_pairs != FILTER_PAIRS {
        return Err(FilterBankError::InvalidConfig(format!(
            "n_pairs must be {FILTER_PAIRS}, got {n_pairs}"
        )));
    }
    if order == 0 || order > 12 {
        return Err(FilterBankError::InvalidConfig(format!("order {order} outside 1..=12")));
    }
    if fir_taps < 16 || fir_taps > DESIGN_FFT_LEN / 2 {
        return Err(FilterBankError::InvalidConfig(format!("fir_taps {fir_taps} outside 16..=4096")));
    }

    let fs = f64::from(sample_rate_hz);
    let centres = erb_space(min_cf_hz, max_cf_hz, n_pairs);
    let mut gammatone = Vec::with_capacity(n_pairs);
    let mut inverse = Vec::with_capacity(n_pairs);
    for &cf in &centres {
        let bw = 1.019 * erb_hz(cf);
        let r = (-2.0 * PI * bw / fs).exp();
        // pole angle chosen so the resonance peak lands exactly on cf
        let theta = ((2.0 * PI * cf / fs).cos() * 2.0 * r / (1.0 + r * r)).acos();
        let section = [-2.0 * r * theta.cos(), r * r];
        let mut spec = FilterSpec {
            kind: FilterKind::Gammatone,
            center_freq_hz: cf,
            bandwidth_hz: bw,
            order,
            coefficients: Coefficients::AllPole {
                gain: 1.0,
                sections: vec![section; order],
            },
        };
        // unit peak gain on the design grid
        let grid: Vec<f64> = (0..DESIGN_FFT_LEN)
            .map(|k| spec.magnitude(k as f64 * fs / DESIGN_FFT_LEN as f64, sample_rate_hz))
            .collect();
        let peak = grid.iter().cloned().fold(0.0, f64::max);
        if let Coefficients::AllPole { gain, .. } = &mut spec.coefficients {
            *gain = 1.0 / peak;
        }
        let target: Vec<f64> = grid
            .iter()
            .map(|m| {
                let g = (m / peak).min(1.0);
                (1.0 - g * g).sqrt().max(NOTCH_FLOOR)
            })
            .collect();
        inverse.push(FilterSpec {
            kind: FilterKind::InverseGammatone,
            center_freq_hz: cf,
            bandwidth_hz: bw,
            order,
            coefficients: Coefficients::Fir {
                taps: minimum_phase_fir(&target, fir_taps),
            },
        });
        gammatone.push(spec);
    }
    gammatone.extend(inverse);
    Ok(FilterBank {
        channels: gammatone,
        sample_rate_hz,
    })
}

impl FilterBank {
    pub fn channels(&self) -> &[FilterSpec] {
        &self.channels
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    /// Channel by 1-based index.
    pub fn channel(&self, index: usize) -> Result<&FilterSpec, FilterBankError> {
        if index == 0 || index > self.channels.len() {
            return Err(FilterBankError::BadChannelIndex(index));
        }
        Ok(&self.channels[index - 1])
    }

    /// Human-readable coefficient dump, one channel per block.
    pub fn coefficient_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# sample_rate_hz {}", self.sample_rate_hz);
        let _ = writeln!(out, "# channel\tkind\tcenter_hz\tbandwidth_hz\torder\tcoefficients");
        for (i, ch) in self.channels.iter().enumerate() {
            let kind = match ch.kind {
                FilterKind::Gammatone => "gammatone",
                FilterKind::InverseGammatone => "inverse_gammatone",
            };
            let coeffs = match &ch.coefficients {
                Coefficients::AllPole { gain, sections } => {
                    let [a1, a2] = sections[0];
                    format!("gain={gain:.12e} a1={a1:.12e} a2={a2:.12e} x{}", sections.len())
                }
                Coefficients::Fir { taps } => taps
                    .iter()
                    .map(|t| format!("{t:.12e}"))
                    .collect::<Vec<_>>()
                    .join(","),
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
                i + 1,
                kind,
                ch.center_freq_hz,
                ch.bandwidth_hz,
                ch.order,
                coeffs
            );
        }
        out
    }
}

/// Filters `audio` through the 1-based channel `channel_index`. No clipping.
pub fn apply_channel(
    bank: &FilterBank,
    channel_index: usize,
    audio: &AudioBuffer,
) -> Result<Vec<f64>, FilterBankError> {
    if audio.sample_rate_hz() != bank.sample_rate_hz {
        return Err(FilterBankError::SampleRateMismatch {
            bank: bank.sample_rate_hz,
            audio: audio.sample_rate_hz(),
        });
    }
    Ok(bank.channel(channel_index)?.filter(audio.samples()))
}
