//! Tandem evaluation reports: per gender and pooled, each value with a
//! bootstrap interval.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use log::info;

use super::config::{GenderMode, RunConfig, TdcfConfig};
use super::manifest::Split;
use super::score::{cm_scores_path, read_scores};
use crate::error::{Error, Result};
use crate::labels::Gender;
use crate::metrics::{
    asv_rates_at_eer, bootstrap_ci, eer, min_adcf_joint, min_dcf, min_tdcf_constrained, min_tdcf_unconstrained,
    BootstrapConfig, MetricEstimate, MetricsError, TandemCostModel, TandemEntry, TandemScoreSet, Task, TrialScoreSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Bona fide vs spoof EER of the countermeasure.
    CmEer,
    /// Target vs non-target minimum DCF of the ASV system.
    AsvMinDcf,
    /// ASV threshold at its EER, CM threshold swept.
    MinTdcfConstrained,
    /// Both thresholds swept.
    MinTdcfUnconstrained,
    MinAdcf,
}

impl Metric {
    pub const ALL: [Metric; 5] =
        [Metric::CmEer, Metric::AsvMinDcf, Metric::MinTdcfConstrained, Metric::MinTdcfUnconstrained, Metric::MinAdcf];

    pub fn name(self) -> &'static str {
        match self {
            Metric::CmEer => "cm_eer",
            Metric::AsvMinDcf => "asv_min_dcf",
            Metric::MinTdcfConstrained => "min_tdcf_constrained",
            Metric::MinTdcfUnconstrained => "min_tdcf_unconstrained",
            Metric::MinAdcf => "min_adcf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Male,
    Female,
    Pooled,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Male, Group::Female, Group::Pooled];

    pub fn name(self) -> &'static str {
        match self {
            Group::Male => "male",
            Group::Female => "female",
            Group::Pooled => "pooled",
        }
    }

    fn gender(self) -> Option<Gender> {
        match self {
            Group::Male => Some(Gender::Male),
            Group::Female => Some(Gender::Female),
            Group::Pooled => None,
        }
    }
}

/// Everything the metric computations need besides the scores.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub cost: TandemCostModel,
    pub cost_asv: TandemCostModel,
    pub cost_adcf: TandemCostModel,
    pub tdcf: TdcfConfig,
    pub bootstrap: BootstrapConfig,
}

impl EvalSettings {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            cost: cfg.cost,
            cost_asv: cfg.cost_asv,
            cost_adcf: cfg.cost_adcf,
            tdcf: cfg.tdcf,
            bootstrap: cfg.bootstrap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub system: String,
    pub split: String,
    pub trials: usize,
    /// Estimate or the reason it is unavailable, keyed by group and metric.
    pub cells: Vec<(Group, Metric, std::result::Result<MetricEstimate, String>)>,
}

/// Pairs each ASV trial with the countermeasure score of its utterance. An
/// ASV trial id `model:utterance` looks up `utterance`; other ids are used
/// as is. ASV trials without a countermeasure score are dropped.
pub fn pair_tandem(cm: &TrialScoreSet, asv: &TrialScoreSet) -> Result<TandemScoreSet> {
    let by_id: HashMap<&str, f64> = cm.entries.iter().map(|e| (e.trial_id.as_str(), e.score)).collect();
    let entries: Vec<TandemEntry> = asv
        .entries
        .iter()
        .filter_map(|a| {
            let utt = a.trial_id.rsplit(':').next().unwrap_or(&a.trial_id);
            by_id.get(utt).map(|&s_cm| TandemEntry {
                trial_id: a.trial_id.clone(),
                gender: a.gender,
                class: a.class,
                s_cm,
                s_asv: a.score,
            })
        })
        .collect();
    if entries.is_empty() {
        return Err(Error::Data("no ASV trial matches a countermeasure score".into()));
    }
    Ok(TandemScoreSet::new(entries)?)
}

fn estimate<T: crate::metrics::Resample + Sync>(
    data: &T,
    cfg: &BootstrapConfig,
    f: impl Fn(&T) -> std::result::Result<f64, MetricsError> + Sync,
) -> std::result::Result<MetricEstimate, String> {
    bootstrap_ci(data, f, cfg).map_err(|e| e.to_string())
}

/// Every metric for every group.
pub fn evaluate(system: &str, split: &str, cm: &TrialScoreSet, asv: &TrialScoreSet, s: &EvalSettings) -> Result<EvalReport> {
    let tandem = pair_tandem(cm, asv)?;
    let grid = s.tdcf.grid();
    let conv = s.tdcf.c1_convention;
    let mut cells = Vec::new();
    for group in Group::ALL {
        let (c, a, t) = match group.gender() {
            Some(g) => (cm.filter_gender(g), asv.filter_gender(g), tandem.filter_gender(g)),
            None => (cm.clone(), asv.clone(), tandem.clone()),
        };
        let b = &s.bootstrap;
        for metric in Metric::ALL {
            let v = match metric {
                Metric::CmEer => estimate(&c, b, |x| Ok(eer(x, Task::Cm)?.0)),
                Metric::AsvMinDcf => estimate(&a, b, |x| Ok(min_dcf(x, &s.cost_asv)?.0)),
                Metric::MinTdcfConstrained => estimate(&t, b, |x| {
                    let (rates, _) = asv_rates_at_eer(&x.asv())?;
                    Ok(min_tdcf_constrained(&x.cm(), &rates, &s.cost, conv)?.value)
                }),
                Metric::MinTdcfUnconstrained => {
                    estimate(&t, b, |x| Ok(min_tdcf_unconstrained(&x.cm(), &x.asv(), &s.cost, grid)?.value))
                }
                Metric::MinAdcf => estimate(&t, b, |x| Ok(min_adcf_joint(x, &s.cost_adcf, grid)?.value)),
            };
            cells.push((group, metric, v));
        }
    }
    Ok(EvalReport { system: system.to_string(), split: split.to_string(), trials: cm.len(), cells })
}

impl EvalReport {
    pub fn get(&self, group: Group, metric: Metric) -> Option<&MetricEstimate> {
        self.cells.iter().find(|c| c.0 == group && c.1 == metric).and_then(|c| c.2.as_ref().ok())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "system {}  split {}  trials {}", self.system, self.split, self.trials);
        let _ = write!(s, "{:<24}", "metric");
        for g in Group::ALL {
            let _ = write!(s, "{:<32}", g.name());
        }
        s.push('\n');
        for m in Metric::ALL {
            let _ = write!(s, "{:<24}", m.name());
            for g in Group::ALL {
                let cell = match self.cells.iter().find(|c| c.0 == g && c.1 == m).map(|c| &c.2) {
                    Some(Ok(e)) => format!("{:.6} [{:.6}, {:.6}]", e.value, e.ci_low, e.ci_high),
                    _ => "n/a".to_string(),
                };
                let _ = write!(s, "{cell:<32}");
            }
            s.truncate(s.trim_end().len());
            s.push('\n');
        }
        let notes: Vec<_> = self.cells.iter().filter_map(|c| c.2.as_ref().err().map(|e| (c.0, c.1, e))).collect();
        for (g, m, e) in notes {
            let _ = writeln!(s, "# {} {}: {e}", g.name(), m.name());
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("system,split,group,metric,value,ci_low,ci_high,n_bootstrap,alpha_percent\n");
        for (g, m, v) in &self.cells {
            match v {
                Ok(e) => {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{:.9e},{:.9e},{:.9e},{},{}",
                        self.system,
                        self.split,
                        g.name(),
                        m.name(),
                        e.value,
                        e.ci_low,
                        e.ci_high,
                        e.n_bootstrap,
                        e.alpha_percent
                    );
                }
                Err(_) => {
                    let _ = writeln!(s, "{},{},{},{},,,,,", self.system, self.split, g.name(), m.name());
                }
            }
        }
        s
    }
}

pub fn report_path(cfg: &RunConfig, split: Split, mode: GenderMode, ext: &str) -> PathBuf {
    cfg.dir("reports").join(format!("{split}_{mode}.{ext}"))
}

/// Evaluates the dev and eval score files of `cfg.gender_mode`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Vec<EvalReport>> {
    let mode = cfg.gender_mode;
    let asv = read_scores(cfg.asv_scores_path(), "synth")?;
    let settings = EvalSettings::from_config(cfg);
    let mut out = Vec::new();
    for split in [Split::Dev, Split::Eval] {
        let path = cm_scores_path(cfg, split, mode);
        if !path.exists() {
            if split == Split::Eval {
                return Err(Error::MissingArtifact { path, producer: "score" });
            }
            continue;
        }
        let cm = read_scores(path, "score")?;
        let report = evaluate(mode.name(), split.name(), &cm, &asv, &settings)?;
        let dir = cfg.dir("reports");
        std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        for (ext, text) in [("txt", report.to_text()), ("csv", report.to_csv())] {
            let p = report_path(cfg, split, mode, ext);
            std::fs::write(&p, text).map_err(Error::io(p))?;
        }
        info!("eval: {split} under {mode}, {} trials", report.trials);
        out.push(report);
    }
    Ok(out)
}
