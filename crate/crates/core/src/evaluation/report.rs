//! Rendering of evaluation reports as JSON or a markdown table.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::str::FromStr;

use serde::Deserialize;

use super::metrics::{EvaluationReport, Scores};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" | "markdown-table" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?}; expected json or md")),
        }
    }
}

/// Published comparison scores shipped with the crate.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ReferenceScores {
    pub per_value_f1: PerValueReference,
    pub averages: BTreeMap<String, ReferenceAverages>,
    pub micro_f1: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct PerValueReference {
    pub columns: Vec<String>,
    pub rows: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
pub struct ReferenceAverages {
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
}

const REFERENCE_JSON: &str = include_str!("../../data/reference_scores.json");

impl ReferenceScores {
    pub fn builtin() -> Self {
        serde_json::from_str(REFERENCE_JSON).expect("bundled reference scores parse")
    }

    pub fn value_f1(&self, value: &str) -> Option<&[f64]> {
        self.per_value_f1.rows.get(value).map(Vec::as_slice)
    }
}

pub fn render_report(report: &EvaluationReport, format: ReportFormat, references: Option<&ReferenceScores>) -> String {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_string_pretty(report).expect("reports serialize");
            out.push('\n');
            out
        }
        ReportFormat::Markdown => render_markdown(report, references),
    }
}

fn f3(x: f64) -> String {
    format!("{x:.3}")
}

fn render_markdown(report: &EvaluationReport, references: Option<&ReferenceScores>) -> String {
    let mut out = String::new();
    let ref_columns = references.map(|r| r.per_value_f1.columns.as_slice()).unwrap_or_default();

    let _ = writeln!(out, "# Evaluation report\n");
    let _ = writeln!(
        out,
        "{} examples, {} gold positives, {} predicted positives.\n",
        report.examples, report.gold_positives, report.predicted_positives
    );
    if let Some(fp) = &report.fingerprint {
        let _ = writeln!(out, "Model `{}`, spec version {}.", fp.model_id, fp.spec_version);
        for (name, hash) in &fp.prompt_hashes {
            let _ = writeln!(out, "- {name} prompt `{}`", &hash[..hash.len().min(12)]);
        }
        out.push('\n');
    }

    out.push_str("| Value | Precision | Recall | F1 | Support |");
    for c in ref_columns {
        let _ = write!(out, " {c} F1 |");
    }
    out.push_str("\n|---|---:|---:|---:|---:|");
    out.push_str(&"---:|".repeat(ref_columns.len()));
    out.push('\n');
    for v in &report.per_value {
        let _ = write!(
            out,
            "| {} | {} | {} | {} | {} |",
            v.value,
            f3(v.scores.precision),
            f3(v.scores.recall),
            f3(v.scores.f1),
            v.support
        );
        for i in 0..ref_columns.len() {
            let cell = references.and_then(|r| r.value_f1(&v.value)).and_then(|row| row.get(i).copied());
            let _ = write!(out, " {} |", cell.map(f3).unwrap_or_else(|| "n/a".into()));
        }
        out.push('\n');
    }

    out.push_str("\n## Aggregates\n\n| Average | Precision | Recall | F1 |\n|---|---:|---:|---:|\n");
    let row = |out: &mut String, name: &str, s: &Scores| {
        let _ = writeln!(out, "| {name} | {} | {} | {} |", f3(s.precision), f3(s.recall), f3(s.f1));
    };
    row(&mut out, "Micro", &report.micro.scores);
    row(&mut out, "Macro", &report.macro_avg);

    if !report.intensity_levels.is_empty() {
        out.push_str("\n## Critic ratings\n\nValues rated `No values` are left out of the scores above. All other levels, `Reframing` included, count as detected.\n\n");
        out.push_str("| Level | Ratings |\n|---|---:|\n");
        for l in &report.intensity_levels {
            let _ = writeln!(out, "| {} | {} |", l.level, l.count);
        }
    }

    if let Some(r) = references {
        out.push_str("\n## Published averages\n\n");
        out.push_str("| Model | Macro P | Macro R | Macro F1 | Micro P | Micro R |\n|---|---:|---:|---:|---:|---:|\n");
        for (model, a) in &r.averages {
            let _ = writeln!(
                out,
                "| {model} | {} | {} | {} | {} | {} |",
                f3(a.macro_precision),
                f3(a.macro_recall),
                f3(a.macro_f1),
                f3(a.micro_precision),
                f3(a.micro_recall)
            );
        }
        out.push_str("\n## Published micro F1\n\n| Model | Micro F1 |\n|---|---:|\n");
        let mut systems: Vec<_> = r.micro_f1.iter().collect();
        systems.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
        for (model, f1) in systems {
            let _ = writeln!(out, "| {model} | {} |", f3(*f1));
        }
        let _ = writeln!(out, "| This run | {} |", f3(report.micro.scores.f1));
    }
    out
}
