//! Seeded synthetic corpus: labeled WAVs, a manifest, ASV scores and a
//! second countermeasure's scores.
//!
//! Bona fide speech is Laplacian excitation through a one-pole filter with a
//! strong low-frequency tilt; spoofed speech is Gaussian excitation through a
//! flatter pole. Gender sets the pitch of a pulse train added to the
//! excitation and the RMS level. `overlap` moves the spoof family toward the
//! bona fide one; at 1 the two are identical in distribution.

use std::path::Path;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::manifest::{Manifest, ManifestRow, Split};
use crate::audio_io::write_wav;
use crate::error::{Error, Result};
use crate::labels::{Gender, TrialClass};
use crate::metrics::{TrialEntry, TrialScoreSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub duration_s: f64,
    /// Utterances per gender, per split.
    pub train_bonafide: usize,
    pub train_spoof: usize,
    pub dev_bonafide: usize,
    pub dev_spoof: usize,
    pub eval_bonafide: usize,
    pub eval_spoof: usize,
    /// 0 keeps the families apart, 1 makes spoofs indistinguishable.
    pub overlap: f64,
    pub genuine_pole: f64,
    pub spoof_pole: f64,
    /// Number of spoofing systems; system `k` adds `k * attack_pole_step` to the pole.
    pub attacks: usize,
    pub attack_pole_step: f64,
    pub male_f0_hz: f64,
    pub female_f0_hz: f64,
    pub male_level: f64,
    pub female_level: f64,
    /// Relative per-utterance jitter of f0 and level.
    pub jitter: f64,
    /// Pulse amplitude relative to the unit-variance excitation.
    pub voicing: f64,
    pub asv_target_mean: f64,
    pub asv_nontarget_mean: f64,
    pub asv_spoof_mean: f64,
    pub asv_sd: f64,
    /// The second countermeasure scores `tanh(N(mean, sd))`, in [-1, 1].
    pub lfcc_bonafide_mean: f64,
    pub lfcc_spoof_mean: f64,
    pub lfcc_sd: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_s: 0.5,
            train_bonafide: 20,
            train_spoof: 40,
            dev_bonafide: 10,
            dev_spoof: 20,
            eval_bonafide: 20,
            eval_spoof: 40,
            overlap: 0.0,
            genuine_pole: 0.95,
            spoof_pole: 0.5,
            attacks: 2,
            attack_pole_step: 0.05,
            male_f0_hz: 120.0,
            female_f0_hz: 220.0,
            male_level: 0.05,
            female_level: 0.12,
            jitter: 0.1,
            voicing: 4.0,
            asv_target_mean: 3.0,
            asv_nontarget_mean: -3.0,
            asv_spoof_mean: 2.5,
            asv_sd: 1.0,
            lfcc_bonafide_mean: 1.0,
            lfcc_spoof_mean: -1.0,
            lfcc_sd: 0.6,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be positive");
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad("overlap must be in [0, 1]");
        }
        let top = self.spoof_pole + self.attacks.saturating_sub(1) as f64 * self.attack_pole_step;
        if [self.genuine_pole, self.spoof_pole, top].iter().any(|p| !(p.abs() < 1.0)) {
            return bad("poles must lie in (-1, 1)");
        }
        if self.attacks == 0 {
            return bad("attacks must be >= 1");
        }
        for l in [self.male_level, self.female_level] {
            if !(l > 0.0 && l <= 0.5) {
                return bad("levels must be in (0, 0.5]");
            }
        }
        if !(self.male_f0_hz > 0.0 && self.female_f0_hz > 0.0) || !(0.0..1.0).contains(&self.jitter) {
            return bad("f0 must be positive and jitter in [0, 1)");
        }
        if !(self.asv_sd > 0.0 && self.lfcc_sd > 0.0) {
            return bad("score spreads must be positive");
        }
        Ok(())
    }

    fn counts(&self, split: Split) -> (usize, usize) {
        match split {
            Split::Train => (self.train_bonafide, self.train_spoof),
            Split::Dev => (self.dev_bonafide, self.dev_spoof),
            Split::Eval => (self.eval_bonafide, self.eval_spoof),
        }
    }

    /// Rows in generation order: split, gender (m, f), bona fide then spoof.
    /// Bona fide rows alternate between target and non-target roles.
    pub fn plan(&self, wav_dir: &Path) -> Vec<ManifestRow> {
        let mut rows = Vec::new();
        for split in Split::ALL {
            let (nb, ns) = self.counts(split);
            for gender in [Gender::Male, Gender::Female] {
                for k in 0..nb {
                    let id = format!("{split}_{gender}_bona_{k:04}");
                    let class = if k % 2 == 0 { TrialClass::Target } else { TrialClass::NonTarget };
                    rows.push(ManifestRow {
                        path: wav_dir.join(format!("{id}.wav")),
                        trial_id: id,
                        gender,
                        class,
                        attack_id: "-".into(),
                        split,
                    });
                }
                for k in 0..ns {
                    let id = format!("{split}_{gender}_spoof_{k:04}");
                    rows.push(ManifestRow {
                        path: wav_dir.join(format!("{id}.wav")),
                        trial_id: id,
                        gender,
                        class: TrialClass::Spoof,
                        attack_id: format!("A{:02}", k % self.attacks + 1),
                        split,
                    });
                }
            }
        }
        rows
    }

    fn rng(&self, index: usize, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((stream << 40) | index as u64);
        rng
    }

    /// Samples of manifest row `index`, in [-1, 1].
    pub fn render(&self, row: &ManifestRow, index: usize, sample_rate_hz: u32) -> Vec<f64> {
        let mut rng = self.rng(index, 0);
        let fs = f64::from(sample_rate_hz);
        let n = (self.duration_s * fs).round().max(1.0) as usize;
        let (f0, level) = match row.gender {
            Gender::Female => (self.female_f0_hz, self.female_level),
            _ => (self.male_f0_hz, self.male_level),
        };
        let mut jit = |v: f64| v * (1.0 + self.jitter * rng.random_range(-1.0..=1.0));
        let period = fs / jit(f0);
        let level = jit(level);
        let (pole, laplace_share) = if row.is_bonafide() {
            (self.genuine_pole, 1.0)
        } else {
            let k = row.attack_id.trim_start_matches('A').parse::<usize>().unwrap_or(1).saturating_sub(1);
            let spoof = self.spoof_pole + k as f64 * self.attack_pole_step;
            ((1.0 - self.overlap) * spoof + self.overlap * self.genuine_pole, self.overlap)
        };
        let warmup = 256;
        let mut y = 0.0;
        let mut next_pulse = rng.random_range(0.0..period);
        let mut out = Vec::with_capacity(n);
        for i in 0..n + warmup {
            // unit-variance Laplacian or Gaussian
            let e = if rng.random::<f64>() < laplace_share {
                let u: f64 = rng.random_range(-0.5..0.5);
                -u.signum() * (1.0 - 2.0 * u.abs()).ln() / std::f64::consts::SQRT_2
            } else {
                StandardNormal.sample(&mut rng)
            };
            let mut x = e;
            if (i as f64) >= next_pulse {
                x += self.voicing;
                next_pulse += period;
            }
            y = pole * y + x;
            if i >= warmup {
                out.push(y);
            }
        }
        let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        out.iter().map(|v| (v * level / rms).clamp(-1.0, 1.0)).collect()
    }

    /// One ASV score per row: Gaussian around the class mean.
    pub fn asv_scores(&self, rows: &[ManifestRow]) -> TrialScoreSet {
        self.scores(rows, 1, |r| match r.class {
            TrialClass::Target => self.asv_target_mean,
            TrialClass::NonTarget => self.asv_nontarget_mean,
            TrialClass::Spoof => self.asv_spoof_mean,
        }, self.asv_sd, false)
    }

    /// Second-countermeasure scores in [-1, 1].
    pub fn lfcc_scores(&self, rows: &[ManifestRow]) -> TrialScoreSet {
        self.scores(rows, 2, |r| if r.is_bonafide() { self.lfcc_bonafide_mean } else { self.lfcc_spoof_mean }, self.lfcc_sd, true)
    }

    fn scores(&self, rows: &[ManifestRow], stream: u64, mean: impl Fn(&ManifestRow) -> f64, sd: f64, squash: bool) -> TrialScoreSet {
        let entries = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let v = Normal::new(mean(r), sd).expect("sd checked").sample(&mut self.rng(i, stream));
                TrialEntry { trial_id: r.trial_id.clone(), gender: r.gender, class: r.class, score: if squash { v.tanh() } else { v } }
            })
            .collect();
        TrialScoreSet { entries }
    }
}

/// Writes the corpus under the configured work directory.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Manifest> {
    let s = &cfg.synth;
    s.validate()?;
    let wav_dir = cfg.dir("wav");
    std::fs::create_dir_all(&wav_dir).map_err(Error::io(&wav_dir))?;
    let rows = s.plan(&wav_dir);
    rows.par_iter().enumerate().try_for_each(|(i, r)| -> Result<()> {
        write_wav(&r.path, &s.render(r, i, cfg.sample_rate_hz), cfg.sample_rate_hz)?;
        Ok(())
    })?;
    let manifest = Manifest { rows };
    let mpath = cfg.manifest_path();
    if let Some(dir) = mpath.parent() {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    manifest.write(&mpath)?;
    s.asv_scores(&manifest.rows).write(cfg.asv_scores_path())?;
    s.lfcc_scores(&manifest.rows).write(cfg.lfcc_scores_path())?;
    info!("synth: {} utterances in {}", manifest.rows.len(), wav_dir.display());
    Ok(manifest)
}
