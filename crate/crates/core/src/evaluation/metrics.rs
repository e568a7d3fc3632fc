//! Multi-label precision, recall and F1.
//!
//! Counts are taken over every (example, value) pair. Per-value scores use
//! the 0/0 = 0 convention; micro scores pool the counts of all values; macro
//! scores are unweighted means over the whole taxonomy, so values that are
//! never predicted or never present contribute zeros.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::DatasetExample;
use crate::detection::DetectionLabel;
use crate::intensity::{AnalyzedRecord, IntensityLevel};
use crate::value_spec::Taxonomy;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("id-mismatch: predictions missing for {missing:?}, predictions without gold {extra:?}")]
    IdMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("duplicate-text-id: {0:?} appears more than once")]
    DuplicateTextId(String),
    #[error("unknown-value: {value:?} on {text_id:?} is not in the taxonomy")]
    UnknownValue { text_id: String, value: String },
}

impl MetricsError {
    pub fn code(&self) -> &'static str {
        match self {
            MetricsError::IdMismatch { .. } => "id-mismatch",
            MetricsError::DuplicateTextId(_) => "duplicate-text-id",
            MetricsError::UnknownValue { .. } => "unknown-value",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, other: Counts) -> Counts {
        Counts { tp: self.tp + other.tp, fp: self.fp + other.fp, fn_: self.fn_ + other.fn_ }
    }
}

impl Counts {
    pub fn scores(self) -> Scores {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        Scores { precision, recall, f1: harmonic_mean(precision, recall) }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// 2PR / (P + R), or 0 when both are 0.
pub fn harmonic_mean(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-value counts in taxonomy order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub per_value: Vec<(String, Counts)>,
}

impl ConfusionCounts {
    pub fn pooled(&self) -> Counts {
        self.per_value.iter().fold(Counts::default(), |acc, (_, c)| acc + *c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueMetrics {
    pub value: String,
    #[serde(flatten)]
    pub counts: Counts,
    /// Gold positives, `tp + fn`.
    pub support: u64,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroMetrics {
    #[serde(flatten)]
    pub counts: Counts,
    #[serde(flatten)]
    pub scores: Scores,
}

/// Identifies the configuration that produced the predictions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFingerprint {
    pub model_id: String,
    pub spec_version: u64,
    pub prompt_hashes: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub examples: usize,
    pub gold_positives: u64,
    pub predicted_positives: u64,
    pub per_value: Vec<ValueMetrics>,
    pub micro: MicroMetrics,
    #[serde(rename = "macro")]
    pub macro_avg: Scores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<RunFingerprint>,
    /// Critic ratings per intensity level, in scale order. Only filled for
    /// critic-filtered reports.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intensity_levels: Vec<LevelCount>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCount {
    pub level: String,
    pub count: u64,
}

/// Counts every rating in `records` by level. All seven levels are listed.
pub fn level_distribution(records: &[AnalyzedRecord]) -> Vec<LevelCount> {
    IntensityLevel::ALL
        .iter()
        .map(|level| LevelCount {
            level: level.label().to_string(),
            count: records.iter().flat_map(|r| &r.annotations).filter(|a| a.level == *level).count() as u64,
        })
        .collect()
}

impl EvaluationReport {
    pub fn value(&self, name: &str) -> Option<&ValueMetrics> {
        self.per_value.iter().find(|v| v.value == name)
    }
}

fn index_predictions(predictions: &[DetectionLabel]) -> Result<HashMap<&str, &BTreeSet<String>>, MetricsError> {
    let mut map = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if map.insert(p.text_id.as_str(), &p.detected).is_some() {
            return Err(MetricsError::DuplicateTextId(p.text_id.clone()));
        }
    }
    Ok(map)
}

pub fn confusion_counts(
    taxonomy: &Taxonomy,
    gold: &[DatasetExample],
    predictions: &[DetectionLabel],
) -> Result<ConfusionCounts, MetricsError> {
    let predicted = index_predictions(predictions)?;
    let mut gold_ids = BTreeSet::new();
    for g in gold {
        if !gold_ids.insert(g.text_id.as_str()) {
            return Err(MetricsError::DuplicateTextId(g.text_id.clone()));
        }
    }
    let missing: Vec<String> =
        gold_ids.iter().filter(|id| !predicted.contains_key(*id)).map(|s| s.to_string()).collect();
    let mut extra: Vec<String> = predicted.keys().filter(|id| !gold_ids.contains(*id)).map(|s| s.to_string()).collect();
    extra.sort();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(MetricsError::IdMismatch { missing, extra });
    }

    let mut counts = vec![Counts::default(); taxonomy.len()];
    let position = |text_id: &str, value: &str| {
        taxonomy
            .names()
            .iter()
            .position(|n| n == value)
            .ok_or_else(|| MetricsError::UnknownValue { text_id: text_id.to_string(), value: value.to_string() })
    };
    for example in gold {
        let pred = predicted[example.text_id.as_str()];
        for value in &example.gold {
            let i = position(&example.text_id, value)?;
            if pred.contains(value) {
                counts[i].tp += 1;
            } else {
                counts[i].fn_ += 1;
            }
        }
        for value in pred.iter().filter(|v| !example.gold.contains(*v)) {
            counts[position(&example.text_id, value)?].fp += 1;
        }
    }
    Ok(ConfusionCounts { per_value: taxonomy.names().iter().cloned().zip(counts).collect() })
}

pub fn compute_metrics(
    taxonomy: &Taxonomy,
    gold: &[DatasetExample],
    predictions: &[DetectionLabel],
) -> Result<EvaluationReport, MetricsError> {
    let confusion = confusion_counts(taxonomy, gold, predictions)?;
    let per_value: Vec<ValueMetrics> = confusion
        .per_value
        .iter()
        .map(|(value, c)| ValueMetrics { value: value.clone(), counts: *c, support: c.tp + c.fn_, scores: c.scores() })
        .collect();
    let n = per_value.len() as f64;
    let mean = |f: fn(&Scores) -> f64| per_value.iter().map(|v| f(&v.scores)).sum::<f64>() / n;
    let macro_avg = Scores { precision: mean(|s| s.precision), recall: mean(|s| s.recall), f1: mean(|s| s.f1) };
    let pooled = confusion.pooled();
    Ok(EvaluationReport {
        examples: gold.len(),
        gold_positives: pooled.tp + pooled.fn_,
        predicted_positives: pooled.tp + pooled.fp,
        per_value,
        micro: MicroMetrics { counts: pooled, scores: pooled.scores() },
        macro_avg,
        fingerprint: None,
        intensity_levels: Vec::new(),
    })
}
