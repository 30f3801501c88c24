//! Trial score sets and their text file format.
//!
//! One trial per line, whitespace separated:
//! `trial_id gender class score` or, for tandem files,
//! `trial_id gender class s_cm s_asv`. Gender is `m`, `f` or `-`; class is
//! `target`, `nontarget` or `spoof`. Blank lines and `#` comments are skipped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{MetricsError, Task};
use crate::labels::{Gender, TrialClass};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialEntry {
    pub trial_id: String,
    pub gender: Gender,
    pub class: TrialClass,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialScoreSet {
    pub entries: Vec<TrialEntry>,
}

fn parse_fields<'a>(line: &'a str, want: usize, path: &str, n: usize) -> Result<Option<Vec<&'a str>>, MetricsError> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(None);
    }
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != want {
        return Err(MetricsError::Parse {
            path: path.to_string(),
            line: n,
            reason: format!("expected {want} fields, found {}", fields.len()),
        });
    }
    Ok(Some(fields))
}

fn parse_head(fields: &[&str], path: &str, n: usize) -> Result<(String, Gender, TrialClass), MetricsError> {
    let err = |reason: String| MetricsError::Parse { path: path.to_string(), line: n, reason };
    let gender = fields[1].parse().map_err(|e: String| err(e))?;
    let class = fields[2].parse().map_err(|e: String| err(e))?;
    Ok((fields[0].to_string(), gender, class))
}

fn parse_score(s: &str, path: &str, n: usize) -> Result<f64, MetricsError> {
    let v: f64 = s.parse().map_err(|_| MetricsError::Parse {
        path: path.to_string(),
        line: n,
        reason: format!("bad score {s:?}"),
    })?;
    if !v.is_finite() {
        return Err(MetricsError::Parse { path: path.to_string(), line: n, reason: "non-finite score".into() });
    }
    Ok(v)
}

fn read_text(path: &Path) -> Result<String, MetricsError> {
    std::fs::read_to_string(path).map_err(|e| MetricsError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), MetricsError> {
    std::fs::write(path, text).map_err(|e| MetricsError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

impl TrialScoreSet {
    pub fn new(entries: Vec<TrialEntry>) -> Result<Self, MetricsError> {
        if let Some(e) = entries.iter().find(|e| !e.score.is_finite()) {
            return Err(MetricsError::NonFiniteScore(e.trial_id.clone()));
        }
        Ok(Self { entries })
    }

    /// Convenience constructor from `(class, score)` pairs with generated ids.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (TrialClass, f64)>) -> Result<Self, MetricsError> {
        Self::new(
            pairs
                .into_iter()
                .enumerate()
                .map(|(i, (class, score))| TrialEntry { trial_id: format!("t{i}"), gender: Gender::Unknown, class, score })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, class: TrialClass) -> usize {
        self.entries.iter().filter(|e| e.class == class).count()
    }

    /// Sorted positive and negative scores for a task.
    pub fn split(&self, task: Task) -> (Vec<f64>, Vec<f64>) {
        let mut pos: Vec<f64> = self.entries.iter().filter(|e| task.is_positive(e.class)).map(|e| e.score).collect();
        let mut neg: Vec<f64> = self.entries.iter().filter(|e| task.is_negative(e.class)).map(|e| e.score).collect();
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        (pos, neg)
    }

    /// Sorted scores of one class.
    pub fn class_scores(&self, class: TrialClass) -> Vec<f64> {
        let mut v: Vec<f64> = self.entries.iter().filter(|e| e.class == class).map(|e| e.score).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn filter_gender(&self, gender: Gender) -> Self {
        Self { entries: self.entries.iter().filter(|e| e.gender == gender).cloned().collect() }
    }

    /// Applies `f` to every score.
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            entries: self.entries.iter().map(|e| TrialEntry { score: f(e.score), ..e.clone() }).collect(),
        }
    }

    pub fn parse(text: &str, path: &str) -> Result<Self, MetricsError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let Some(f) = parse_fields(line, 4, path, i + 1)? else { continue };
            let (trial_id, gender, class) = parse_head(&f, path, i + 1)?;
            entries.push(TrialEntry { trial_id, gender, class, score: parse_score(f[3], path, i + 1)? });
        }
        Self::new(entries)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {} {:.17e}", e.trial_id, e.gender.code(), e.class, e.score);
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), MetricsError> {
        write_text(path.as_ref(), &self.to_text())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TandemEntry {
    pub trial_id: String,
    pub gender: Gender,
    pub class: TrialClass,
    pub s_cm: f64,
    pub s_asv: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TandemScoreSet {
    pub entries: Vec<TandemEntry>,
}

impl TandemScoreSet {
    pub fn new(entries: Vec<TandemEntry>) -> Result<Self, MetricsError> {
        if let Some(e) = entries.iter().find(|e| !e.s_cm.is_finite() || !e.s_asv.is_finite()) {
            return Err(MetricsError::NonFiniteScore(e.trial_id.clone()));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cm(&self) -> TrialScoreSet {
        TrialScoreSet {
            entries: self
                .entries
                .iter()
                .map(|e| TrialEntry { trial_id: e.trial_id.clone(), gender: e.gender, class: e.class, score: e.s_cm })
                .collect(),
        }
    }

    pub fn asv(&self) -> TrialScoreSet {
        TrialScoreSet {
            entries: self
                .entries
                .iter()
                .map(|e| TrialEntry { trial_id: e.trial_id.clone(), gender: e.gender, class: e.class, score: e.s_asv })
                .collect(),
        }
    }

    pub fn filter_gender(&self, gender: Gender) -> Self {
        Self { entries: self.entries.iter().filter(|e| e.gender == gender).cloned().collect() }
    }

    pub fn parse(text: &str, path: &str) -> Result<Self, MetricsError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let Some(f) = parse_fields(line, 5, path, i + 1)? else { continue };
            let (trial_id, gender, class) = parse_head(&f, path, i + 1)?;
            entries.push(TandemEntry {
                trial_id,
                gender,
                class,
                s_cm: parse_score(f[3], path, i + 1)?,
                s_asv: parse_score(f[4], path, i + 1)?,
            });
        }
        Self::new(entries)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {} {:.17e} {:.17e}", e.trial_id, e.gender.code(), e.class, e.s_cm, e.s_asv);
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), MetricsError> {
        write_text(path.as_ref(), &self.to_text())
    }
}

/// Pairs CM and ASV scores on `trial_id`, in CM order. Class and gender come
/// from the CM set; every trial must appear in both sets.
pub fn join_tandem(cm: &TrialScoreSet, asv: &TrialScoreSet) -> Result<TandemScoreSet, MetricsError> {
    let by_id: HashMap<&str, &TrialEntry> = asv.entries.iter().map(|e| (e.trial_id.as_str(), e)).collect();
    if by_id.len() != asv.len() || cm.len() != asv.len() {
        let cm_ids: std::collections::HashSet<&str> = cm.entries.iter().map(|e| e.trial_id.as_str()).collect();
        let missing = asv
            .entries
            .iter()
            .find(|e| !cm_ids.contains(e.trial_id.as_str()))
            .map(|e| e.trial_id.clone())
            .or_else(|| cm.entries.iter().find(|e| !by_id.contains_key(e.trial_id.as_str())).map(|e| e.trial_id.clone()))
            .unwrap_or_else(|| "<duplicate id>".into());
        return Err(MetricsError::UnpairedTrials(missing));
    }
    let entries = cm
        .entries
        .iter()
        .map(|c| {
            let a = by_id.get(c.trial_id.as_str()).ok_or_else(|| MetricsError::UnpairedTrials(c.trial_id.clone()))?;
            Ok(TandemEntry { trial_id: c.trial_id.clone(), gender: c.gender, class: c.class, s_cm: c.score, s_asv: a.score })
        })
        .collect::<Result<_, MetricsError>>()?;
    TandemScoreSet::new(entries)
}
