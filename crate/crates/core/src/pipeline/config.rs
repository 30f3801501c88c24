//! Run configuration: a TOML file where every key has a default.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::synth::SynthConfig;
use crate::classifiers::{GbdtParams, GroupedMlpSpec, LogregParams};
use crate::embedding::EmbedConfig;
use crate::error::{Error, Result};
use crate::filterbank::FilterBankConfig;
use crate::fusion::FusionConfig;
use crate::metrics::{BootstrapConfig, C1Convention, TandemCostModel};

/// How countermeasure models are routed by gender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderMode {
    /// Per-gender models, selected by the trained gender recognizer.
    GenderDependent,
    /// One pooled model for every utterance.
    GenderIndependent,
    /// Per-gender models, selected by the manifest's gender labels.
    OracleLabels,
}

impl GenderMode {
    pub const ALL: [GenderMode; 3] = [GenderMode::GenderDependent, GenderMode::GenderIndependent, GenderMode::OracleLabels];

    pub fn name(self) -> &'static str {
        match self {
            GenderMode::GenderDependent => "gender_dependent",
            GenderMode::GenderIndependent => "gender_independent",
            GenderMode::OracleLabels => "oracle_labels",
        }
    }
}

impl fmt::Display for GenderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GenderMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "gender_dependent" | "gd" => Ok(GenderMode::GenderDependent),
            "gender_independent" | "gi" => Ok(GenderMode::GenderIndependent),
            "oracle_labels" | "oracle" => Ok(GenderMode::OracleLabels),
            other => Err(format!("unknown gender mode '{other}'")),
        }
    }
}

/// Artifact locations. Relative paths resolve against `work_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub work_dir: PathBuf,
    pub manifest: PathBuf,
    pub asv_scores: PathBuf,
    /// Scores of the second (frequency-domain) countermeasure, for `fuse`.
    pub lfcc_scores: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            work_dir: PathBuf::from("work"),
            manifest: PathBuf::from("manifest.tsv"),
            asv_scores: PathBuf::from("asv_scores.txt"),
            lfcc_scores: PathBuf::from("lfcc_scores.txt"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderClassifierKind {
    LogisticRegression,
    Gbdt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenderConfig {
    pub classifier: GenderClassifierKind,
    /// Pick hyperparameters by grid search on dev accuracy when dev has labels.
    pub tune_on_dev: bool,
    pub logreg: LogregParams,
    pub gbdt: GbdtParams,
}

impl Default for GenderConfig {
    fn default() -> Self {
        Self { classifier: GenderClassifierKind::Gbdt, tune_on_dev: true, logreg: LogregParams::default(), gbdt: GbdtParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmConfig {
    /// Oversample the minority class of each training set.
    pub smote: bool,
    pub smote_k: usize,
    pub smote_seed: u64,
    pub male: GroupedMlpSpec,
    pub female: GroupedMlpSpec,
    pub gender_independent: GroupedMlpSpec,
}

impl Default for CmConfig {
    fn default() -> Self {
        Self {
            smote: true,
            smote_k: 5,
            smote_seed: 0,
            male: GroupedMlpSpec::male(),
            female: GroupedMlpSpec::female(),
            gender_independent: GroupedMlpSpec::gender_independent(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TdcfConfig {
    pub c1_convention: C1Convention,
    /// Cap on thresholds per axis for the joint searches; 0 means every midpoint.
    pub max_grid: usize,
}

impl Default for TdcfConfig {
    fn default() -> Self {
        Self { c1_convention: C1Convention::default(), max_grid: 200 }
    }
}

impl TdcfConfig {
    pub fn grid(&self) -> Option<usize> {
        (self.max_grid > 0).then_some(self.max_grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Rayon worker count; 0 uses every core.
    pub threads: usize,
    pub gender_mode: GenderMode,
    pub sample_rate_hz: u32,
    pub paths: PathsConfig,
    pub filterbank: FilterBankConfig,
    pub embedding: EmbedConfig,
    pub synth: SynthConfig,
    pub gender: GenderConfig,
    pub cm: CmConfig,
    /// Tandem costs for t-DCF and a-DCF.
    pub cost: TandemCostModel,
    /// Costs for the ASV-only minDCF.
    pub cost_asv: TandemCostModel,
    /// Priors and costs for the a-DCF.
    pub cost_adcf: TandemCostModel,
    pub tdcf: TdcfConfig,
    pub bootstrap: BootstrapConfig,
    pub fusion: FusionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            threads: 0,
            gender_mode: GenderMode::GenderDependent,
            sample_rate_hz: 16000,
            paths: PathsConfig::default(),
            filterbank: FilterBankConfig::default(),
            embedding: EmbedConfig::default(),
            synth: SynthConfig::default(),
            gender: GenderConfig::default(),
            cm: CmConfig::default(),
            cost: TandemCostModel::default(),
            cost_asv: TandemCostModel::asv_only(),
            cost_adcf: TandemCostModel::default(),
            tdcf: TdcfConfig::default(),
            bootstrap: BootstrapConfig::default(),
            fusion: FusionConfig::default(),
        }
    }
}

/// splitmix64 step, used to derive stage seeds from one base seed.
fn mix(base: u64, stage: u64) -> u64 {
    let mut z = base.wrapping_add(stage.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.embedding.similarity.validate().map_err(|e| Error::Config(e.to_string()))?;
        crate::pmf::check_epsilon(self.embedding.epsilon).map_err(|e| Error::Config(e.to_string()))?;
        crate::filterbank::design_bank(self.sample_rate_hz, &self.filterbank).map_err(|e| Error::Config(e.to_string()))?;
        for spec in [&self.cm.male, &self.cm.female, &self.cm.gender_independent] {
            spec.validate().map_err(|e| Error::Config(format!("cm: {e}")))?;
        }
        if self.cm.smote_k == 0 {
            return cfg("cm.smote_k must be >= 1".into());
        }
        for (name, c) in [("cost", &self.cost), ("cost_asv", &self.cost_asv), ("cost_adcf", &self.cost_adcf)] {
            c.validate().map_err(|e| Error::Config(format!("{name}: {e}")))?;
        }
        self.bootstrap.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.fusion.validate().map_err(|e| Error::Config(format!("fusion: {e}")))?;
        self.synth.validate()?;
        if self.tdcf.max_grid == 1 {
            return cfg("tdcf.max_grid must be 0 or >= 2".into());
        }
        Ok(())
    }

    /// Replaces every stage seed with one derived from `base`.
    pub fn reseed(&mut self, base: u64) {
        self.synth.seed = mix(base, 1);
        self.gender.gbdt.seed = mix(base, 2);
        self.cm.smote_seed = mix(base, 3);
        self.cm.male.seed = mix(base, 4);
        self.cm.female.seed = mix(base, 5);
        self.cm.gender_independent.seed = mix(base, 6);
        self.bootstrap.seed = mix(base, 7);
        self.fusion.gbdt.seed = mix(base, 8);
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.paths.work_dir.join(p)
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.resolve(&self.paths.manifest)
    }

    pub fn asv_scores_path(&self) -> PathBuf {
        self.resolve(&self.paths.asv_scores)
    }

    pub fn lfcc_scores_path(&self) -> PathBuf {
        self.resolve(&self.paths.lfcc_scores)
    }

    pub fn dir(&self, name: &str) -> PathBuf {
        self.paths.work_dir.join(name)
    }
}
