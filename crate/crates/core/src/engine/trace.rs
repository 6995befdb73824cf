//! Search trace records, written one JSON object per line.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::hyperspace::Value;
use crate::learnzoo::EvalStatus;
use crate::surrogate::Provenance;

use super::cache::CacheCause;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    Screen,
    Retest,
    Optimize,
    /// A random-search baseline evaluation.
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Default,
    Random,
    Guided,
    Retest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneEntry {
    pub algorithm: String,
    pub min_error: f64,
    /// Why it was removed; absent for survivors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceRecord {
    RoundStart {
        round: usize,
        tau: Option<f64>,
        fs_budget: f64,
        train_budget: f64,
        cycles: Option<usize>,
        fraction: Option<f64>,
        keep: Option<f64>,
        survivors: Vec<String>,
        sample_sizes: Vec<usize>,
    },
    Propose {
        round: usize,
        algorithm: String,
        source: Source,
        combination: BTreeMap<String, Value>,
    },
    Eval {
        round: usize,
        algorithm: String,
        step: Step,
        combination: BTreeMap<String, Value>,
        status: EvalStatus,
        raw_error: f64,
        adjusted_error: f64,
        fold_errors: Vec<f64>,
        fs_time: f64,
        train_time: f64,
        validate_time: f64,
        provenance: Provenance,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cached: Option<CacheCause>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diagnostic: Option<String>,
    },
    Skip {
        round: usize,
        algorithm: String,
        step: Step,
        combination: BTreeMap<String, Value>,
        status: EvalStatus,
        reason: String,
        raw_error: f64,
        adjusted_error: f64,
        provenance: Provenance,
    },
    Inject {
        round: usize,
        algorithm: String,
        combination: BTreeMap<String, Value>,
        raw_error: f64,
        adjusted_error: f64,
        provenance: Provenance,
    },
    Prune {
        round: usize,
        stage: String,
        tau: f64,
        best: f64,
        entries: Vec<PruneEntry>,
    },
    FinalCv {
        round: usize,
        algorithm: String,
        combination: BTreeMap<String, Value>,
        fold_errors: Vec<f64>,
        mean_error: f64,
        prev_estimate: f64,
        time: f64,
        wins: usize,
    },
    Champion {
        round: usize,
        algorithm: String,
        combination: BTreeMap<String, Value>,
        method: String,
        prev_estimate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cv_mean: Option<f64>,
        uses_fs: bool,
        partial: bool,
    },
}

impl TraceRecord {
    pub fn kind(&self) -> &'static str {
        match self {
            TraceRecord::RoundStart { .. } => "round-start",
            TraceRecord::Propose { .. } => "propose",
            TraceRecord::Eval { .. } => "eval",
            TraceRecord::Skip { .. } => "skip",
            TraceRecord::Inject { .. } => "inject",
            TraceRecord::Prune { .. } => "prune",
            TraceRecord::FinalCv { .. } => "final-cv",
            TraceRecord::Champion { .. } => "champion",
        }
    }
}

/// Serializes records as JSON lines.
pub fn to_jsonl(records: &[TraceRecord]) -> crate::Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_jsonl(text: &str) -> crate::Result<Vec<TraceRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| crate::Error::Parse {
                line: i as u64 + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
