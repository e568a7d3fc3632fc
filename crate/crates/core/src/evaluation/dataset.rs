//! ValueEval-style gold corpora: a sentences TSV (`Text-ID`, `Text`) joined
//! with a labels TSV (`Text-ID` plus one numeric column per value).
//!
//! Label columns are matched to the taxonomy by normalized name. Columns
//! suffixed ` attained` or ` constrained` count toward their base value, and
//! a value is positive when any of its cells reaches the threshold. When both
//! files carry a `Sentence-ID` column the join key is `<Text-ID>_<Sentence-ID>`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::TextInput;
use crate::value_spec::Taxonomy;

pub const DEFAULT_GOLD_THRESHOLD: f64 = 0.5;
const TEXT_ID: &str = "Text-ID";
const SENTENCE_ID: &str = "Sentence-ID";
const TEXT: &str = "Text";
const SUFFIXES: [&str; 2] = [" attained", " constrained"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("missing-file: {0}")]
    MissingFile(PathBuf),
    #[error("header-mismatch in {file}: {message}")]
    HeaderMismatch { file: PathBuf, message: String },
    #[error("duplicate-text-id: {0:?}")]
    DuplicateTextId(String),
    #[error("unknown-value-column: {0:?} does not name a taxonomy value")]
    UnknownValueColumn(String),
    #[error("join-error: labels without sentences {labels_only:?}; sentences without labels {sentences_only:?}")]
    JoinError { labels_only: Vec<String>, sentences_only: Vec<String> },
    #[error("invalid-cell in {file} row {row} column {column:?}: {cell:?}")]
    InvalidCell { file: PathBuf, row: usize, column: String, cell: String },
    #[error("empty-text: {0:?} has no text")]
    EmptyText(String),
    #[error("io-error: {0}")]
    Io(String),
}

impl DatasetError {
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::MissingFile(_) => "missing-file",
            DatasetError::HeaderMismatch { .. } => "header-mismatch",
            DatasetError::DuplicateTextId(_) => "duplicate-text-id",
            DatasetError::UnknownValueColumn(_) => "unknown-value-column",
            DatasetError::JoinError { .. } => "join-error",
            DatasetError::InvalidCell { .. } => "invalid-cell",
            DatasetError::EmptyText(_) => "empty-text",
            DatasetError::Io(_) => "io-error",
        }
    }
}

/// A gold-labelled text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetExample {
    pub text_id: String,
    pub text: String,
    pub gold: BTreeSet<String>,
}

impl DatasetExample {
    /// The text without its labels, for feeding to detection.
    pub fn input(&self) -> TextInput {
        TextInput::new(self.text_id.clone(), self.text.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnMatch {
    pub column: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImportedDataset {
    pub examples: Vec<DatasetExample>,
    pub columns: Vec<ColumnMatch>,
    /// Taxonomy values with no label column at all.
    pub unlabelled_values: Vec<String>,
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, DatasetError> {
    if !path.is_file() {
        return Err(DatasetError::MissingFile(path.to_path_buf()));
    }
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(true)
        .from_path(path)
        .map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))
}

fn headers(rdr: &mut csv::Reader<std::fs::File>, path: &Path) -> Result<Vec<String>, DatasetError> {
    let headers = rdr.headers().map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
    Ok(headers.iter().map(|h| h.trim().trim_start_matches('\u{feff}').to_string()).collect())
}

fn find_column(headers: &[String], name: &str) -> Option<usize> {
    headers.iter().position(|h| h.eq_ignore_ascii_case(name))
}

fn require_column(headers: &[String], name: &str, path: &Path) -> Result<usize, DatasetError> {
    find_column(headers, name).ok_or_else(|| DatasetError::HeaderMismatch {
        file: path.to_path_buf(),
        message: format!("missing column {name:?}; found {headers:?}"),
    })
}

fn row_key(record: &csv::StringRecord, text_col: usize, sentence_col: Option<usize>) -> String {
    let text_id = record.get(text_col).unwrap_or_default().trim();
    match sentence_col.and_then(|c| record.get(c)) {
        Some(s) => format!("{text_id}_{}", s.trim()),
        None => text_id.to_string(),
    }
}

fn records<'a>(
    rdr: &'a mut csv::Reader<std::fs::File>,
    path: &Path,
) -> impl Iterator<Item = Result<(usize, csv::StringRecord), DatasetError>> + 'a {
    let path = path.to_path_buf();
    rdr.records()
        .enumerate()
        .map(move |(i, r)| r.map(|rec| (i + 2, rec)).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display()))))
}

/// Reads just the texts of a sentences file.
pub fn read_sentences(path: &Path) -> Result<Vec<TextInput>, DatasetError> {
    let mut rdr = reader(path)?;
    let headers = headers(&mut rdr, path)?;
    let id_col = require_column(&headers, TEXT_ID, path)?;
    let text_col = require_column(&headers, TEXT, path)?;
    let sentence_col = find_column(&headers, SENTENCE_ID);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in records(&mut rdr, path) {
        let (_, record) = row?;
        let text_id = row_key(&record, id_col, sentence_col);
        if !seen.insert(text_id.clone()) {
            return Err(DatasetError::DuplicateTextId(text_id));
        }
        let text = record.get(text_col).unwrap_or_default().to_string();
        if text.trim().is_empty() {
            return Err(DatasetError::EmptyText(text_id));
        }
        out.push(TextInput { text_id, text });
    }
    Ok(out)
}

fn match_column(header: &str, taxonomy: &Taxonomy) -> Option<String> {
    if let Ok(v) = taxonomy.canonicalize(header) {
        return Some(v.to_string());
    }
    let lower = header.to_lowercase();
    SUFFIXES.iter().find_map(|suffix| {
        let base = lower.strip_suffix(suffix)?;
        taxonomy.canonicalize(base).ok().map(str::to_string)
    })
}

pub fn import_dataset(
    sentences: &Path,
    labels: &Path,
    taxonomy: &Taxonomy,
    threshold: f64,
) -> Result<ImportedDataset, DatasetError> {
    let texts = read_sentences(sentences)?;
    let sentences_have_sid = {
        let mut rdr = reader(sentences)?;
        find_column(&headers(&mut rdr, sentences)?, SENTENCE_ID).is_some()
    };

    let mut rdr = reader(labels)?;
    let headers = headers(&mut rdr, labels)?;
    let id_col = require_column(&headers, TEXT_ID, labels)?;
    let sentence_col = find_column(&headers, SENTENCE_ID);
    if sentence_col.is_some() != sentences_have_sid {
        return Err(DatasetError::HeaderMismatch {
            file: labels.to_path_buf(),
            message: format!("{SENTENCE_ID} must appear in both files or in neither"),
        });
    }
    let mut columns = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if i == id_col || Some(i) == sentence_col {
            continue;
        }
        let value = match_column(h, taxonomy).ok_or_else(|| DatasetError::UnknownValueColumn(h.clone()))?;
        columns.push((i, ColumnMatch { column: h.clone(), value }));
    }

    let mut gold: HashMap<String, BTreeSet<String>> = HashMap::new();
    let mut label_order = Vec::new();
    for row in records(&mut rdr, labels) {
        let (line, record) = row?;
        let text_id = row_key(&record, id_col, sentence_col);
        let mut positives = BTreeSet::new();
        for (col, m) in &columns {
            let cell = record.get(*col).unwrap_or_default().trim();
            let score: f64 = cell.parse().map_err(|_| DatasetError::InvalidCell {
                file: labels.to_path_buf(),
                row: line,
                column: m.column.clone(),
                cell: cell.to_string(),
            })?;
            if score >= threshold {
                positives.insert(m.value.clone());
            }
        }
        if gold.insert(text_id.clone(), positives).is_some() {
            return Err(DatasetError::DuplicateTextId(text_id));
        }
        label_order.push(text_id);
    }

    let text_ids: HashSet<&str> = texts.iter().map(|t| t.text_id.as_str()).collect();
    let labels_only: Vec<String> = label_order.into_iter().filter(|id| !text_ids.contains(id.as_str())).collect();
    let sentences_only: Vec<String> =
        texts.iter().filter(|t| !gold.contains_key(&t.text_id)).map(|t| t.text_id.clone()).collect();
    if !labels_only.is_empty() || !sentences_only.is_empty() {
        return Err(DatasetError::JoinError { labels_only, sentences_only });
    }

    let examples = texts
        .into_iter()
        .map(|t| {
            let gold = gold.remove(&t.text_id).unwrap_or_default();
            DatasetExample { text_id: t.text_id, text: t.text, gold }
        })
        .collect();
    let labelled: BTreeMap<&str, ()> = columns.iter().map(|(_, m)| (m.value.as_str(), ())).collect();
    let unlabelled_values = taxonomy.names().iter().filter(|n| !labelled.contains_key(n.as_str())).cloned().collect();
    Ok(ImportedDataset { examples, columns: columns.into_iter().map(|(_, m)| m).collect(), unlabelled_values })
}

/// Writes a sentences/labels pair in the layout [`import_dataset`] reads.
pub fn write_dataset(
    sentences: &Path,
    labels: &Path,
    taxonomy: &Taxonomy,
    examples: &[DatasetExample],
) -> Result<(), DatasetError> {
    let io = |e: std::io::Error| DatasetError::Io(e.to_string());
    let mut s = format!("{TEXT_ID}\t{TEXT}\n");
    let mut l =
        std::iter::once(TEXT_ID.to_string()).chain(taxonomy.names().iter().cloned()).collect::<Vec<_>>().join("\t");
    l.push('\n');
    for ex in examples {
        s.push_str(&format!("{}\t{}\n", ex.text_id, ex.text.replace(['\t', '\n'], " ")));
        l.push_str(&ex.text_id);
        for name in taxonomy.names() {
            l.push_str(if ex.gold.contains(name) { "\t1" } else { "\t0" });
        }
        l.push('\n');
    }
    std::fs::write(sentences, s).map_err(io)?;
    std::fs::write(labels, l).map_err(io)
}
