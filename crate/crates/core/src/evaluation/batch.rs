//! Checkpointed, parallel batch runs over many texts.
//!
//! Each finished text appends one JSON line to the checkpoint file, written
//! by a single thread. A rerun with the same checkpoint skips every text that
//! already has a record, so an interrupted run resumes where it stopped. The
//! first line holds a fingerprint of the run configuration; resuming under a
//! different configuration is refused. Results are returned sorted by
//! text id, independent of completion order.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::detection::{detect_values, DetectionLabel, TextInput, UnknownNamePolicy};
use crate::intensity::{analyze_intensity, AnalyzedText};
use crate::llm::{Gateway, LlmRole, RoleId};
use crate::template::PromptTemplate;
use crate::value_spec::{ensure_valid, SpecError, ValueTheorySpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BatchError {
    #[error("duplicate-text-id: {0:?}")]
    DuplicateTextId(String),
    #[error("checkpoint-mismatch: {path} was written by a different configuration")]
    CheckpointMismatch { path: PathBuf },
    #[error("io-error: {0}")]
    Io(String),
    #[error("configuration-error: {0}")]
    Config(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

impl BatchError {
    pub fn code(&self) -> &'static str {
        match self {
            BatchError::DuplicateTextId(_) => "duplicate-text-id",
            BatchError::CheckpointMismatch { .. } => "checkpoint-mismatch",
            BatchError::Io(_) => "io-error",
            BatchError::Config(_) => "configuration-error",
            BatchError::Spec(e) => e.code(),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> BatchError + '_ {
    move |e| BatchError::Io(format!("{}: {e}", path.display()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub text_id: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
enum CheckpointRecord<T> {
    Header { fingerprint: String },
    Ok { text_id: String, result: T },
    Error { text_id: String, code: String, message: String },
}

#[derive(Clone, Debug, Default)]
pub struct BatchOptions {
    /// Worker threads; 0 is treated as 1.
    pub parallelism: usize,
    pub checkpoint: Option<PathBuf>,
    /// Process at most this many not-yet-checkpointed texts, then stop.
    pub max_new: Option<usize>,
}

impl BatchOptions {
    pub fn with_parallelism(parallelism: usize) -> Self {
        Self { parallelism, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutcome<T> {
    pub results: Vec<(String, T)>,
    pub failures: Vec<ItemFailure>,
    /// Texts restored from the checkpoint rather than processed.
    pub resumed: usize,
    pub processed: usize,
    /// Texts left for a later run because of `max_new`.
    pub pending: usize,
}

impl<T> BatchOutcome<T> {
    pub fn is_complete(&self) -> bool {
        self.pending == 0
    }
}

pub trait Keyed {
    fn key(&self) -> &str;
}

impl Keyed for TextInput {
    fn key(&self) -> &str {
        &self.text_id
    }
}

impl<B> Keyed for (TextInput, B) {
    fn key(&self) -> &str {
        &self.0.text_id
    }
}

fn load_checkpoint<T: DeserializeOwned>(
    path: &Path,
    fingerprint: &str,
) -> Result<BTreeMap<String, Result<T, ItemFailure>>, BatchError> {
    let mut done = BTreeMap::new();
    if !path.exists() {
        return Ok(done);
    }
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let record = match serde_json::from_str::<CheckpointRecord<T>>(&line) {
            Ok(r) => r,
            Err(e) => {
                if !line.trim().is_empty() {
                    tracing::warn!(path = %path.display(), line = i + 1, error = %e, "ignoring unreadable checkpoint line");
                }
                continue;
            }
        };
        match record {
            CheckpointRecord::Header { fingerprint: f } if f != fingerprint => {
                return Err(BatchError::CheckpointMismatch { path: path.to_path_buf() });
            }
            CheckpointRecord::Header { .. } => {}
            CheckpointRecord::Ok { text_id, result } => {
                done.insert(text_id, Ok(result));
            }
            CheckpointRecord::Error { text_id, code, message } => {
                done.insert(text_id.clone(), Err(ItemFailure { text_id, code, message }));
            }
        }
    }
    Ok(done)
}

/// Opens the checkpoint for appending, dropping a torn final line.
fn open_checkpoint(path: &Path, fingerprint: &str) -> Result<File, BatchError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    let existing = if path.exists() { std::fs::read(path).map_err(io_err(path))? } else { Vec::new() };
    let keep = existing.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if keep != existing.len() {
        let file = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
        file.set_len(keep as u64).map_err(io_err(path))?;
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
    if keep == 0 {
        let header = CheckpointRecord::<()>::Header { fingerprint: fingerprint.to_string() };
        writeln!(file, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io_err(path))?;
    }
    Ok(file)
}

/// Runs `task` over every item not yet in the checkpoint.
pub fn run_checkpointed<I, T, F>(
    items: &[I],
    fingerprint: &str,
    options: &BatchOptions,
    task: F,
) -> Result<BatchOutcome<T>, BatchError>
where
    I: Keyed + Sync,
    T: Serialize + DeserializeOwned + Send,
    F: Fn(&I) -> Result<T, ItemFailure> + Sync,
{
    let mut ids = HashSet::with_capacity(items.len());
    for item in items {
        if !ids.insert(item.key()) {
            return Err(BatchError::DuplicateTextId(item.key().to_string()));
        }
    }

    let mut done = match &options.checkpoint {
        Some(path) => load_checkpoint::<T>(path, fingerprint)?,
        None => BTreeMap::new(),
    };
    done.retain(|id, _| ids.contains(id.as_str()));
    let resumed = done.len();

    let mut todo: Vec<&I> = items.iter().filter(|i| !done.contains_key(i.key())).collect();
    let pending = options.max_new.map_or(0, |m| todo.len().saturating_sub(m));
    todo.truncate(todo.len() - pending);

    let mut writer = match &options.checkpoint {
        Some(path) => Some((open_checkpoint(path, fingerprint)?, path.clone())),
        None => None,
    };

    let workers = options.parallelism.max(1).min(todo.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(String, Result<T, ItemFailure>)>();
    let mut write_error = None;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (todo, next, task) = (&todo, &next, &task);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = todo.get(i) else { break };
                if tx.send((item.key().to_string(), task(item))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (text_id, result) in rx {
            if let Some((file, path)) = writer.as_mut() {
                let record = match &result {
                    Ok(r) => serde_json::to_string(&CheckpointRecord::Ok { text_id: text_id.clone(), result: r }),
                    Err(f) => serde_json::to_string(&CheckpointRecord::<()>::Error {
                        text_id: text_id.clone(),
                        code: f.code.clone(),
                        message: f.message.clone(),
                    }),
                }
                .expect("records serialize");
                if let Err(e) = writeln!(file, "{record}").and_then(|_| file.flush()) {
                    write_error.get_or_insert(BatchError::Io(format!("{}: {e}", path.display())));
                }
            }
            done.insert(text_id, result);
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }

    let mut results = Vec::with_capacity(done.len());
    let mut failures = Vec::new();
    for (text_id, r) in done {
        match r {
            Ok(v) => results.push((text_id, v)),
            Err(f) => failures.push(f),
        }
    }
    Ok(BatchOutcome { results, failures, resumed, processed: todo.len(), pending })
}

/// Per-text output of [`run_batch`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchItem {
    pub label: DetectionLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyzed: Option<AnalyzedText>,
}

/// Everything a detection (and optional critic) run needs.
pub struct PipelineConfig<'a> {
    pub gateway: &'a Gateway,
    pub spec: &'a ValueTheorySpec,
    pub detection_template: &'a PromptTemplate,
    pub detector: &'a LlmRole,
    /// Template and role for the critic pass; `None` runs detection only.
    pub critic: Option<(&'a PromptTemplate, &'a LlmRole)>,
    pub policy: UnknownNamePolicy,
}

impl PipelineConfig<'_> {
    /// Hash of everything that changes model output.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for part in [
            serde_json::to_string(self.spec).unwrap_or_default(),
            self.detection_template.content_hash(),
            serde_json::to_string(self.detector).unwrap_or_default(),
            format!("{:?}", self.policy),
        ] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        if let Some((t, r)) = self.critic {
            h.update(t.content_hash().as_bytes());
            h.update(serde_json::to_string(r).unwrap_or_default().as_bytes());
        }
        hex::encode(h.finalize())
    }

    fn validate(&self) -> Result<(), BatchError> {
        ensure_valid(self.spec)?;
        self.detector.expect(RoleId::Detector).map_err(|e| BatchError::Config(e.to_string()))?;
        if let Some((_, critic)) = self.critic {
            critic.expect(RoleId::Critic).map_err(|e| BatchError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Detects values in every input, optionally followed by the critic pass.
/// Gold labels cannot reach this function: it only sees [`TextInput`]s.
pub fn run_batch(
    inputs: &[TextInput],
    config: &PipelineConfig<'_>,
    options: &BatchOptions,
) -> Result<BatchOutcome<BatchItem>, BatchError> {
    config.validate()?;
    run_checkpointed(inputs, &config.fingerprint(), options, |input| {
        let label = detect_values(
            config.gateway,
            input,
            config.spec,
            config.detection_template,
            config.detector,
            config.policy,
        )
        .map_err(|e| ItemFailure {
            text_id: input.text_id.clone(),
            code: e.code().into(),
            message: e.to_string(),
        })?;
        let analyzed = match config.critic {
            Some((template, role)) => Some(
                analyze_intensity(config.gateway, input, &label, config.spec, template, role, config.policy).map_err(
                    |e| ItemFailure { text_id: input.text_id.clone(), code: e.code().into(), message: e.to_string() },
                )?,
            ),
            None => None,
        };
        Ok(BatchItem { label, analyzed })
    })
}

/// Critic pass over texts that already have detection labels.
pub fn run_intensity_batch(
    labelled: &[(TextInput, DetectionLabel)],
    gateway: &Gateway,
    spec: &ValueTheorySpec,
    template: &PromptTemplate,
    critic: &LlmRole,
    policy: UnknownNamePolicy,
    options: &BatchOptions,
) -> Result<BatchOutcome<AnalyzedText>, BatchError> {
    ensure_valid(spec)?;
    critic.expect(RoleId::Critic).map_err(|e| BatchError::Config(e.to_string()))?;
    let fingerprint = {
        let mut h = Sha256::new();
        h.update(serde_json::to_string(spec).unwrap_or_default().as_bytes());
        h.update(template.content_hash().as_bytes());
        h.update(serde_json::to_string(critic).unwrap_or_default().as_bytes());
        h.update(format!("{policy:?}").as_bytes());
        hex::encode(h.finalize())
    };
    run_checkpointed(labelled, &fingerprint, options, |(input, label)| {
        analyze_intensity(gateway, input, label, spec, template, critic, policy).map_err(|e| ItemFailure {
            text_id: input.text_id.clone(),
            code: e.code().into(),
            message: e.to_string(),
        })
    })
}
