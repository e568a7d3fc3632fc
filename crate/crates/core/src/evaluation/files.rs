//! JSON-lines files for predictions and analyzed texts.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use super::metrics::RunFingerprint;
use crate::detection::{DetectionLabel, PredictionRecord};
use crate::intensity::{AnalyzedRecord, AnalyzedText};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FileError {
    #[error("io-error: {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("malformed-record: {path} line {line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("duplicate-text-id: {0:?}")]
    DuplicateTextId(String),
}

impl FileError {
    pub fn code(&self) -> &'static str {
        match self {
            FileError::Io { .. } => "io-error",
            FileError::Malformed { .. } => "malformed-record",
            FileError::DuplicateTextId(_) => "duplicate-text-id",
        }
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> FileError + '_ {
    move |e| FileError::Io { path: path.to_path_buf(), message: e.to_string() }
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<(), FileError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).expect("records serialize"));
        out.push('\n');
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io(path))?;
    }
    std::fs::write(path, out).map_err(io(path))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FileError> {
    let content = std::fs::read_to_string(path).map_err(io(path))?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| FileError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), FileError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(FileError::DuplicateTextId(id.to_string()));
        }
    }
    Ok(())
}

pub fn write_predictions(path: &Path, labels: &[DetectionLabel], include_raw: bool) -> Result<(), FileError> {
    write_jsonl(path, labels.iter().map(|l| l.to_record(include_raw)))
}

pub fn read_predictions(path: &Path) -> Result<Vec<DetectionLabel>, FileError> {
    let records: Vec<PredictionRecord> = read_jsonl(path)?;
    check_unique(records.iter().map(|r| r.text_id.as_str()))?;
    Ok(records.into_iter().map(DetectionLabel::from).collect())
}

pub fn write_analyzed(path: &Path, analyzed: &[AnalyzedText]) -> Result<(), FileError> {
    write_jsonl(path, analyzed.iter().map(AnalyzedText::to_record))
}

pub fn read_analyzed(path: &Path) -> Result<Vec<AnalyzedRecord>, FileError> {
    let records: Vec<AnalyzedRecord> = read_jsonl(path)?;
    check_unique(records.iter().map(|r| r.text_id.as_str()))?;
    Ok(records)
}

/// `<predictions>.meta.json`
pub fn fingerprint_path(predictions: &Path) -> PathBuf {
    let mut name = predictions.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    predictions.with_file_name(name)
}

pub fn write_fingerprint(predictions: &Path, fingerprint: &RunFingerprint) -> Result<(), FileError> {
    let path = fingerprint_path(predictions);
    let mut text = serde_json::to_string_pretty(fingerprint).expect("fingerprints serialize");
    text.push('\n');
    std::fs::write(&path, text).map_err(io(&path))
}

/// The sidecar fingerprint, if one was written next to the predictions.
pub fn read_fingerprint(predictions: &Path) -> Result<Option<RunFingerprint>, FileError> {
    let path = fingerprint_path(predictions);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(io(&path))?;
    serde_json::from_str(&text).map(Some).map_err(|e| FileError::Malformed { path, line: 1, message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pred.jsonl");
        let labels = vec![
            DetectionLabel { text_id: "a".into(), detected: ["Face".to_string()].into(), raw_response: "raw".into() },
            DetectionLabel { text_id: "b".into(), detected: Default::default(), raw_response: String::new() },
        ];
        write_predictions(&p, &labels, true).unwrap();
        assert_eq!(read_predictions(&p).unwrap(), labels);
        write_predictions(&p, &labels, false).unwrap();
        assert!(!std::fs::read_to_string(&p).unwrap().contains("raw_response"));
        assert_eq!(fingerprint_path(&p), dir.path().join("pred.jsonl.meta.json"));
    }

    #[test]
    fn malformed_line_is_located() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pred.jsonl");
        std::fs::write(&p, "{\"text_id\":\"a\",\"detected\":[]}\nnot json\n").unwrap();
        match read_predictions(&p).unwrap_err() {
            FileError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "{\"text_id\":\"a\",\"detected\":[]}\n{\"text_id\":\"a\",\"detected\":[]}\n").unwrap();
        assert_eq!(read_predictions(&p).unwrap_err().code(), "duplicate-text-id");
    }
}
