//! Per-sample records, run summaries and their files.

use std::fmt::Write as _;
use std::path::Path;

use evofuzz::{Model, SampleTrace};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Bumped whenever a field of [`SampleRecord`] or [`Summary`] changes meaning.
pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// Which part of a protocol produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Predicted, then learned.
    Prequential,
    /// Learned, prediction logged for reference only.
    Train,
    /// Predicted with learning frozen.
    Test,
}

/// One line of `metrics.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub schema: u32,
    /// Position in the input data.
    pub index: usize,
    pub phase: Phase,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fold: Option<usize>,
    pub prediction: Option<Vec<f64>>,
    pub target: Vec<f64>,
    /// Mean over outputs of the squared prediction error.
    pub sq_error: Option<f64>,
    pub rule_count: usize,
    pub delta1: f64,
    pub accepted: bool,
    pub warmup: bool,
    pub entropy: Option<f64>,
    pub grown: Option<u64>,
    pub recalled: Option<u64>,
    pub pruned: Vec<u64>,
    pub q: Vec<f64>,
    pub error_density: Option<f64>,
    pub skipped: Option<String>,
}

fn sq_error(pred: &Option<Vec<f64>>, target: &[f64]) -> Option<f64> {
    pred.as_ref()
        .map(|y| y.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / target.len() as f64)
}

impl SampleRecord {
    pub fn from_trace(index: usize, phase: Phase, fold: Option<usize>, target: &[f64], tr: SampleTrace<f64>) -> Self {
        let sq = sq_error(&tr.prediction, target);
        Self {
            schema: METRICS_SCHEMA_VERSION,
            index,
            phase,
            fold,
            prediction: tr.prediction,
            target: target.to_vec(),
            sq_error: sq,
            rule_count: tr.rule_count,
            delta1: tr.delta1,
            accepted: tr.accepted,
            warmup: tr.warmup,
            entropy: tr.entropy,
            grown: tr.grown,
            recalled: tr.recalled,
            pruned: tr.pruned,
            q: tr.q,
            error_density: tr.error_density,
            skipped: tr.skipped,
        }
    }

    /// A frozen-model evaluation.
    pub fn from_prediction(index: usize, fold: Option<usize>, target: &[f64], prediction: Option<Vec<f64>>, model: &Model) -> Self {
        let sq = sq_error(&prediction, target);
        Self {
            schema: METRICS_SCHEMA_VERSION,
            index,
            phase: Phase::Test,
            fold,
            prediction,
            target: target.to_vec(),
            sq_error: sq,
            rule_count: model.rule_count(),
            delta1: model.gate.delta1,
            accepted: false,
            warmup: !model.warmed_up(),
            entropy: None,
            grown: None,
            recalled: None,
            pruned: Vec::new(),
            q: model.q.clone(),
            error_density: None,
            skipped: None,
        }
    }

    /// Whether this record's error counts toward the reported score.
    pub fn scored(&self) -> bool {
        self.phase != Phase::Train && self.sq_error.is_some()
    }
}

/// Parameters held by a model with `r` rules, `p` inputs and `m` outputs:
/// per rule the radii (`p`), inverse covariance (`p²`), lower and upper
/// centroids (`2p`), consequent (`(2p+1)m`), recurrent weight and population
/// count; then
/// `q` (`m`) and the global `δ1`, `η_q`, `η_λ`.
pub fn parameter_count(r: usize, p: usize, m: usize) -> usize {
    r * (p + p * p + 2 * p + (2 * p + 1) * m + 2) + m + 3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub label: String,
    pub rule_count: usize,
    pub parameter_count: usize,
    pub seen: u64,
    pub accepted: u64,
    pub grown: u64,
    pub pruned: u64,
    pub recalled: u64,
    pub skipped: u64,
}

impl ModelSummary {
    pub fn of(label: &str, m: &Model) -> Self {
        Self {
            label: label.to_string(),
            rule_count: m.rule_count(),
            parameter_count: parameter_count(m.rule_count(), m.p, m.m),
            seen: m.counters.seen,
            accepted: m.counters.accepted,
            grown: m.counters.grown,
            pruned: m.counters.pruned,
            recalled: m.counters.recalled,
            skipped: m.counters.skipped,
        }
    }
}

/// Contents of `summary.json`. Wall-clock figures live in `timing.json` so
/// that this file is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub protocol: String,
    pub p: usize,
    pub m: usize,
    pub samples: usize,
    pub csv_rows_skipped: usize,
    pub evaluated: usize,
    pub mse: Option<f64>,
    pub rmse: Option<f64>,
    /// Samples the gate let through to learning, summed over models.
    pub samples_used: u64,
    pub samples_learned_from: u64,
    pub acceptance_fraction: Option<f64>,
    pub mean_rule_count: f64,
    pub mean_parameter_count: f64,
    pub models: Vec<ModelSummary>,
}

impl Summary {
    pub fn build(protocol: &str, p: usize, m: usize, samples: usize, csv_rows_skipped: usize, records: &[SampleRecord], models: &[ModelSummary]) -> Self {
        let errs: Vec<f64> = records.iter().filter(|r| r.scored()).filter_map(|r| r.sq_error).collect();
        let mse = (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64);
        let used: u64 = models.iter().map(|s| s.accepted).sum();
        let seen: u64 = models.iter().map(|s| s.seen).sum();
        let k = models.len().max(1) as f64;
        Self {
            schema: METRICS_SCHEMA_VERSION,
            protocol: protocol.to_string(),
            p,
            m,
            samples,
            csv_rows_skipped,
            evaluated: errs.len(),
            mse,
            rmse: mse.map(f64::sqrt),
            samples_used: used,
            samples_learned_from: seen,
            acceptance_fraction: (seen > 0).then(|| used as f64 / seen as f64),
            mean_rule_count: models.iter().map(|s| s.rule_count as f64).sum::<f64>() / k,
            mean_parameter_count: models.iter().map(|s| s.parameter_count as f64).sum::<f64>() / k,
            models: models.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub schema: u32,
    pub wall_seconds: f64,
    pub samples_per_second: f64,
}

pub fn records_to_jsonl(records: &[SampleRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(out, "{line}").expect("writing to a String");
    }
    out
}

pub fn read_jsonl(path: &Path) -> Result<Vec<SampleRecord>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let rec: SampleRecord = serde_json::from_str(l)
                .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
            if rec.schema != METRICS_SCHEMA_VERSION {
                return Err(CliError::Data(format!(
                    "{}:{}: metrics schema {} unsupported, expected {METRICS_SCHEMA_VERSION}",
                    path.display(),
                    i + 1,
                    rec.schema
                )));
            }
            Ok(rec)
        })
        .collect()
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn to_json_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("summary serializes");
    s.push('\n');
    s
}
