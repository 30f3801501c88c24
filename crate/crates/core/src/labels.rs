//! Label vocabularies shared by score files, manifests and datasets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    /// Single-character code used in score files and manifests.
    pub fn code(self) -> &'static str {
        match self {
            Gender::Male => "m",
            Gender::Female => "f",
            Gender::Unknown => "-",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "m" | "male" => Ok(Gender::Male),
            "f" | "female" => Ok(Gender::Female),
            "-" | "u" | "unknown" => Ok(Gender::Unknown),
            other => Err(format!("unknown gender '{other}'")),
        }
    }
}

/// Trial class in the tandem evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialClass {
    Target,
    #[serde(rename = "nontarget")]
    NonTarget,
    Spoof,
}

impl TrialClass {
    pub const ALL: [TrialClass; 3] = [TrialClass::Target, TrialClass::NonTarget, TrialClass::Spoof];

    pub fn name(self) -> &'static str {
        match self {
            TrialClass::Target => "target",
            TrialClass::NonTarget => "nontarget",
            TrialClass::Spoof => "spoof",
        }
    }

    pub fn is_bonafide(self) -> bool {
        !matches!(self, TrialClass::Spoof)
    }
}

impl fmt::Display for TrialClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrialClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "target" => Ok(TrialClass::Target),
            "nontarget" | "non-target" => Ok(TrialClass::NonTarget),
            "spoof" => Ok(TrialClass::Spoof),
            other => Err(format!("unknown trial class '{other}'")),
        }
    }
}
