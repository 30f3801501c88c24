//! Utterance manifests.
//!
//! Tab-separated with a header line:
//! `trial_id path gender class attack_id split`. Relative paths resolve
//! against the manifest's directory. Bona fide rows carry their ASV role
//! (`target` or `nontarget`) as class; spoofed rows carry `spoof`.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Gender, TrialClass};

pub const HEADER: &str = "trial_id\tpath\tgender\tclass\tattack_id\tsplit";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Eval,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Eval];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Eval => "eval",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "train" | "trn" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "eval" => Ok(Split::Eval),
            other => Err(format!("unknown split '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub trial_id: String,
    pub path: PathBuf,
    pub gender: Gender,
    pub class: TrialClass,
    /// `-` for bona fide speech.
    pub attack_id: String,
    pub split: Split,
}

impl ManifestRow {
    pub fn is_bonafide(&self) -> bool {
        self.class.is_bonafide()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn parse(text: &str, base_dir: &Path, origin: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') || line == HEADER {
                continue;
            }
            let bad = |reason: String| Error::Data(format!("{origin}:{}: {reason}", n + 1));
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(bad(format!("expected 6 tab-separated fields, found {}", f.len())));
            }
            let path = PathBuf::from(f[1]);
            rows.push(ManifestRow {
                trial_id: f[0].to_string(),
                path: if path.is_absolute() { path } else { base_dir.join(path) },
                gender: f[2].parse().map_err(bad)?,
                class: f[3].parse().map_err(bad)?,
                attack_id: f[4].to_string(),
                split: f[5].parse().map_err(bad)?,
            });
        }
        let m = Self { rows };
        m.check_unique().map_err(|e| Error::Data(format!("{origin}: {e}")))?;
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingArtifact { path: path.to_path_buf(), producer: "synth" });
        }
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, &path.display().to_string())
    }

    /// Manifest text with paths written relative to `base_dir` where possible.
    pub fn to_text(&self, base_dir: &Path) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for r in &self.rows {
            let p = r.path.strip_prefix(base_dir).unwrap_or(&r.path);
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.trial_id,
                p.display(),
                r.gender,
                r.class,
                r.attack_id,
                r.split
            ));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        std::fs::write(path, self.to_text(base)).map_err(Error::io(path))
    }

    fn check_unique(&self) -> std::result::Result<(), String> {
        let mut seen = HashMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            if let Some(j) = seen.insert(r.trial_id.as_str(), i) {
                return Err(format!("trial id {} appears on rows {} and {}", r.trial_id, j + 1, i + 1));
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn count(&self, split: Split, gender: Gender, bonafide: bool) -> usize {
        self.split(split).filter(|r| r.gender == gender && r.is_bonafide() == bonafide).count()
    }

    /// Reads an ASVspoof 2019 LA countermeasure protocol
    /// (`SPEAKER FILE - ATTACK KEY` per line). Audio is looked up as
    /// `<audio_dir>/<FILE>.flac`, falling back to `.wav`. Speaker genders come
    /// from enrolment lists whose first column is the speaker id, e.g.
    /// `ASVspoof2019.LA.asv.dev.female.trn.txt`. Bona fide rows get class
    /// `target`; their ASV role lives in the ASV score file.
    pub fn from_asvspoof2019(
        protocol: &Path,
        audio_dir: &Path,
        split: Split,
        gender_lists: &[(Gender, PathBuf)],
    ) -> Result<Self> {
        let mut speaker_gender = HashMap::new();
        for (g, list) in gender_lists {
            let text = std::fs::read_to_string(list).map_err(Error::io(list))?;
            for spk in text.lines().filter_map(|l| l.split_whitespace().next()) {
                speaker_gender.insert(spk.to_string(), *g);
            }
        }
        let text = std::fs::read_to_string(protocol).map_err(Error::io(protocol))?;
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != 5 {
                return Err(Error::Data(format!(
                    "{}:{}: expected 5 fields, found {}",
                    protocol.display(),
                    n + 1,
                    f.len()
                )));
            }
            let class = match f[4] {
                "bonafide" => TrialClass::Target,
                "spoof" => TrialClass::Spoof,
                other => return Err(Error::Data(format!("{}:{}: unknown key '{other}'", protocol.display(), n + 1))),
            };
            let flac = audio_dir.join(format!("{}.flac", f[1]));
            let wav = audio_dir.join(format!("{}.wav", f[1]));
            rows.push(ManifestRow {
                trial_id: f[1].to_string(),
                path: if !flac.exists() && wav.exists() { wav } else { flac },
                gender: speaker_gender.get(f[0]).copied().unwrap_or(Gender::Unknown),
                class,
                attack_id: f[3].to_string(),
                split,
            });
        }
        let m = Self { rows };
        m.check_unique().map_err(Error::Data)?;
        Ok(m)
    }

    pub fn extend(&mut self, other: Manifest) -> Result<()> {
        self.rows.extend(other.rows);
        self.check_unique().map_err(Error::Data)
    }
}
