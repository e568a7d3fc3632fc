//! Subcommands of the `valuelens` binary.
//!
//! Failures print one JSON line `{"error": {"code", "message"}}` to stderr
//! and exit with the code from [`crate::exit`].

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use crate::clock::{Clock, FixedClock, SystemClock};
use crate::conceptualization::{conceptualize, SourceDocument};
use crate::config::RunConfig;
use crate::detection::{detect_values, DetectionLabel, TextInput, UnknownNamePolicy};
use crate::evaluation::{
    compute_metrics, import_dataset, level_distribution, read_analyzed, read_fingerprint, read_predictions,
    read_sentences, render_report, run_batch, run_intensity_batch, write_analyzed, write_fingerprint,
    write_predictions, BatchOptions, BatchOutcome, EvaluationReport, ItemFailure, PipelineConfig, ReferenceScores,
    ReportFormat, RunFingerprint, DEFAULT_GOLD_THRESHOLD,
};
use crate::exit::exit_code;
use crate::intensity::{AnalyzedRecord, IntensityLevel};
use crate::llm::RoleId;
use crate::service::{AnalysisSetup, AppState};
use crate::value_spec::{serialize_spec, Taxonomy, ValueTheorySpec};

#[derive(Debug, Parser)]
#[command(name = "valuelens", version, about = "Detect human values in text with language models")]
pub struct Cli {
    /// JSON run configuration; defaults to $VALUELENS_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Use this RFC 3339 time for every timestamp written.
    #[arg(long, global = true, env = "VALUELENS_FIXED_CLOCK")]
    pub fixed_clock: Option<DateTime<Utc>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a value specification from source documents.
    Conceptualize(ConceptualizeArgs),
    /// Detect values in one text or in every row of a sentences TSV.
    Detect(DetectArgs),
    /// Rate the intensity of detected values.
    Intensity(IntensityArgs),
    /// Score predictions against gold labels.
    Evaluate(EvaluateArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ConceptualizeArgs {
    /// Directory of .txt/.md source documents.
    #[arg(long)]
    pub sources: PathBuf,
    /// Prompt template; the bundled one when unset.
    #[arg(long)]
    pub template: Option<PathBuf>,
    #[arg(long, default_value = "Schwartz refined theory of basic values")]
    pub theory: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Checkpoint file; defaults to `<out>.checkpoint.jsonl`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub no_checkpoint: bool,
    /// Worker threads; defaults to the configured parallelism.
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Drop model-invented value names instead of failing the text.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// A plain-text file (one text) or a sentences TSV (`Text-ID`, `Text`).
    #[arg(long, conflicts_with = "text", required_unless_present = "text")]
    pub input: Option<PathBuf>,
    /// Analyse this text instead of a file.
    #[arg(long)]
    pub text: Option<String>,
    /// Predictions JSON-lines; required for TSV input.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep the raw model answer in each prediction.
    #[arg(long)]
    pub include_raw: bool,
    #[command(flatten)]
    pub batch: BatchArgs,
}

#[derive(Debug, Args)]
pub struct IntensityArgs {
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub pred: PathBuf,
    /// Sentences TSV holding the texts the predictions refer to.
    #[arg(long)]
    pub texts: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub batch: BatchArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Labels TSV.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub sentences: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// `md` or `json`.
    #[arg(long, default_value = "md")]
    pub format: ReportFormat,
    /// Take the taxonomy from this spec instead of the 19 Schwartz values.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Gold cells at or above this count as positive.
    #[arg(long, default_value_t = DEFAULT_GOLD_THRESHOLD)]
    pub threshold: f64,
    /// Score texts without a prediction as detecting nothing.
    #[arg(long)]
    pub missing_as_empty: bool,
    /// Add published scores next to this run's.
    #[arg(long)]
    pub references: bool,
    /// Analyzed JSON-lines; scores a second report without values the critic rated `No values`.
    #[arg(long, requires = "critic_report")]
    pub analyzed: Option<PathBuf>,
    #[arg(long, requires = "analyzed")]
    pub critic_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Address to listen on; defaults to the configured one.
    #[arg(long)]
    pub bind: Option<String>,
    /// Where finished job results are written.
    #[arg(long)]
    pub results_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: String,
    pub message: String,
}

impl CliError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(&self.code)
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "code": self.code, "message": self.message } }).to_string()
    }
}

macro_rules! coded_error {
    ($($t:ty),* $(,)?) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::new(e.code(), e.to_string())
            }
        }
    )*};
}

coded_error!(
    crate::config::ConfigError,
    crate::conceptualization::ConceptualizationError,
    crate::detection::DetectionError,
    crate::evaluation::BatchError,
    crate::evaluation::DatasetError,
    crate::evaluation::FileError,
    crate::evaluation::MetricsError,
    crate::value_spec::SpecError,
    crate::template::TemplateError,
);

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new("io-error", format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| io_error(path, e))
}

/// Runs a parsed command line. `Ok` carries text for stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    let config = RunConfig::load(cli.config.as_deref())?;
    let clock: Arc<dyn Clock> = match cli.fixed_clock {
        Some(t) => Arc::new(FixedClock(t)),
        None => Arc::new(SystemClock),
    };
    match cli.command {
        Command::Conceptualize(a) => run_conceptualize(&config, &a, clock.as_ref()),
        Command::Detect(a) => run_detect(&config, &a),
        Command::Intensity(a) => run_intensity(&config, &a),
        Command::Evaluate(a) => run_evaluate(&config, &a),
        Command::Serve(a) => run_serve(&config, &a, clock),
    }
}

fn run_conceptualize(config: &RunConfig, a: &ConceptualizeArgs, clock: &dyn Clock) -> Result<String, CliError> {
    if !a.sources.is_dir() {
        return Err(CliError::new("missing-file", format!("sources directory {} does not exist", a.sources.display())));
    }
    let sources = SourceDocument::load_dir(&a.sources)?;
    let template = match &a.template {
        Some(p) => crate::template::PromptTemplate::load(p, crate::conceptualization::PLACEHOLDERS)?,
        None => config.conceptualization_template()?,
    };
    let gateway = config.build_gateway()?;
    let spec = conceptualize(&gateway, &sources, &template, &config.role(RoleId::Conceptualizer), &a.theory, clock)?;
    write_file(&a.out, &serialize_spec(&spec)?)?;
    Ok(format!("wrote {} values to {}\n", spec.values.len(), a.out.display()))
}

fn policy(config: &RunConfig, batch: &BatchArgs) -> UnknownNamePolicy {
    if batch.lenient {
        UnknownNamePolicy::Lenient
    } else {
        config.unknown_names
    }
}

fn batch_options(config: &RunConfig, batch: &BatchArgs, out: &Path) -> BatchOptions {
    let checkpoint = (!batch.no_checkpoint).then(|| {
        batch.checkpoint.clone().unwrap_or_else(|| {
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".checkpoint.jsonl");
            out.with_file_name(name)
        })
    });
    BatchOptions { parallelism: batch.parallelism.unwrap_or(config.parallelism), checkpoint, max_new: None }
}

fn report_failures<T>(outcome: &BatchOutcome<T>) -> Result<(), CliError> {
    if outcome.failures.is_empty() {
        return Ok(());
    }
    for f in &outcome.failures {
        eprintln!("{}", serde_json::json!({ "text_id": f.text_id, "code": f.code, "message": f.message }));
    }
    let ItemFailure { text_id, code, .. } = &outcome.failures[0];
    Err(CliError::new(
        "partial-failure",
        format!(
            "{} of {} texts failed, first {text_id:?} with {code}",
            outcome.failures.len(),
            outcome.failures.len() + outcome.results.len()
        ),
    ))
}

fn is_tsv(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("tsv"))
}

fn run_detect(config: &RunConfig, a: &DetectArgs) -> Result<String, CliError> {
    let spec = config.load_spec(a.spec.as_deref())?;
    let template = config.detection_template()?;
    let detector = config.role(RoleId::Detector);
    let gateway = config.build_gateway()?;
    let policy = policy(config, &a.batch);

    let single = match (&a.text, &a.input) {
        (Some(text), _) => Some(TextInput::new("text", text.clone())),
        (None, Some(path)) if !is_tsv(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    CliError::new("missing-file", format!("{} does not exist", path.display()))
                } else {
                    io_error(path, e)
                }
            })?;
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("text");
            Some(TextInput::new(id, text))
        }
        _ => None,
    };
    if let Some(input) = single {
        let label = detect_values(&gateway, &input, &spec, &template, &detector, policy)?;
        if let Some(out) = &a.out {
            write_predictions(out, std::slice::from_ref(&label), a.include_raw)?;
        }
        return Ok(label.detected.iter().map(|v| format!("{v}\n")).collect());
    }

    let input = a.input.as_deref().expect("clap requires --input or --text");
    let out =
        a.out.as_deref().ok_or_else(|| CliError::new("configuration-error", "--out is required for TSV input"))?;
    let inputs = read_sentences(input)?;
    let pipeline = PipelineConfig {
        gateway: &gateway,
        spec: &spec,
        detection_template: &template,
        detector: &detector,
        critic: None,
        policy,
    };
    let outcome = run_batch(&inputs, &pipeline, &batch_options(config, &a.batch, out))?;
    let labels: Vec<DetectionLabel> = outcome.results.iter().map(|(_, item)| item.label.clone()).collect();
    write_predictions(out, &labels, a.include_raw)?;
    let fingerprint = RunFingerprint {
        model_id: detector.model_id.clone(),
        spec_version: spec.version,
        prompt_hashes: BTreeMap::from([("detection".to_string(), template.content_hash())]),
    };
    write_fingerprint(out, &fingerprint)?;
    report_failures(&outcome)?;
    Ok(format!("wrote {} predictions to {}\n", labels.len(), out.display()))
}

fn run_intensity(config: &RunConfig, a: &IntensityArgs) -> Result<String, CliError> {
    let spec = config.load_spec(a.spec.as_deref())?;
    let template = config.intensity_template()?;
    let critic = config.role(RoleId::Critic);
    let labels = read_predictions(&a.pred)?;
    let texts: HashMap<String, TextInput> =
        read_sentences(&a.texts)?.into_iter().map(|t| (t.text_id.clone(), t)).collect();
    let unknown: Vec<&str> = labels.iter().map(|l| l.text_id.as_str()).filter(|id| !texts.contains_key(*id)).collect();
    if !unknown.is_empty() {
        return Err(CliError::new(
            "id-mismatch",
            format!("predictions for texts not in {}: {unknown:?}", a.texts.display()),
        ));
    }
    let labelled: Vec<(TextInput, DetectionLabel)> =
        labels.into_iter().map(|l| (texts[&l.text_id].clone(), l)).collect();
    let gateway = config.build_gateway()?;
    let outcome = run_intensity_batch(
        &labelled,
        &gateway,
        &spec,
        &template,
        &critic,
        policy(config, &a.batch),
        &batch_options(config, &a.batch, &a.out),
    )?;
    let analyzed: Vec<_> = outcome.results.iter().map(|(_, t)| t.clone()).collect();
    write_analyzed(&a.out, &analyzed)?;
    report_failures(&outcome)?;
    Ok(format!("wrote {} analyzed texts to {}\n", analyzed.len(), a.out.display()))
}

fn critic_filtered(record: &AnalyzedRecord) -> DetectionLabel {
    let kept = record
        .detected
        .iter()
        .filter(|v| !record.annotations.iter().any(|a| &a.value == *v && a.level == IntensityLevel::NoValues))
        .cloned()
        .collect();
    DetectionLabel { text_id: record.text_id.clone(), detected: kept, raw_response: String::new() }
}

fn evaluate_labels(
    taxonomy: &Taxonomy,
    gold: &[crate::evaluation::DatasetExample],
    mut labels: Vec<DetectionLabel>,
    missing_as_empty: bool,
) -> Result<EvaluationReport, CliError> {
    if missing_as_empty {
        let have: std::collections::HashSet<String> = labels.iter().map(|l| l.text_id.clone()).collect();
        for g in gold.iter().filter(|g| !have.contains(&g.text_id)) {
            labels.push(DetectionLabel {
                text_id: g.text_id.clone(),
                detected: Default::default(),
                raw_response: String::new(),
            });
        }
    }
    Ok(compute_metrics(taxonomy, gold, &labels)?)
}

fn run_evaluate(config: &RunConfig, a: &EvaluateArgs) -> Result<String, CliError> {
    let taxonomy = match &a.spec {
        Some(p) => config.load_spec(Some(p))?.taxonomy()?,
        None => Taxonomy::schwartz(),
    };
    let dataset = import_dataset(&a.sentences, &a.gold, &taxonomy, a.threshold)?;
    for c in &dataset.columns {
        tracing::debug!(column = %c.column, value = %c.value, "label column");
    }
    if !dataset.unlabelled_values.is_empty() {
        tracing::warn!(values = ?dataset.unlabelled_values, "no label column for some values");
    }
    let references = a.references.then(ReferenceScores::builtin);

    let mut report = evaluate_labels(&taxonomy, &dataset.examples, read_predictions(&a.pred)?, a.missing_as_empty)?;
    report.fingerprint = read_fingerprint(&a.pred)?;
    write_file(&a.report, &render_report(&report, a.format, references.as_ref()))?;
    let mut summary = format!(
        "micro P {:.3} R {:.3} F1 {:.3}; macro F1 {:.3}\n",
        report.micro.scores.precision, report.micro.scores.recall, report.micro.scores.f1, report.macro_avg.f1
    );

    if let (Some(analyzed), Some(out)) = (&a.analyzed, &a.critic_report) {
        let records = read_analyzed(analyzed)?;
        let filtered = records.iter().map(critic_filtered).collect();
        let mut critic = evaluate_labels(&taxonomy, &dataset.examples, filtered, a.missing_as_empty)?;
        critic.fingerprint = report.fingerprint.clone();
        critic.intensity_levels = level_distribution(&records);
        write_file(out, &render_report(&critic, a.format, references.as_ref()))?;
        summary.push_str(&format!(
            "critic-filtered micro F1 {:.3}; macro F1 {:.3}\n",
            critic.micro.scores.f1, critic.macro_avg.f1
        ));
    }
    Ok(summary)
}

fn run_serve(config: &RunConfig, a: &ServeArgs, clock: Arc<dyn Clock>) -> Result<String, CliError> {
    let spec_path = a
        .spec
        .clone()
        .or_else(|| config.spec_path.clone())
        .ok_or_else(|| CliError::new("configuration-error", "no spec given; pass --spec or set spec_path"))?;
    let spec: ValueTheorySpec = config.load_spec(Some(&spec_path))?;
    // Built outside the runtime: the live client is blocking.
    let setup = AnalysisSetup {
        gateway: Arc::new(config.build_gateway()?),
        detection_template: config.detection_template()?,
        intensity_template: config.intensity_template()?,
        detector: config.role(RoleId::Detector),
        critic: config.role(RoleId::Critic),
        policy: config.unknown_names,
        workers: config.parallelism,
    };
    let results_dir = a.results_dir.clone().unwrap_or_else(|| config.service.results_dir.clone());
    let state = Arc::new(
        AppState::new(spec, Some(spec_path), setup, results_dir.clone(), clock)
            .map_err(|e| io_error(&results_dir, e))?,
    );
    let bind = a.bind.clone().unwrap_or_else(|| config.service.bind.clone());
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::new("io-error", e.to_string()))?;
    let served = runtime.block_on({
        let state = state.clone();
        async move {
            let listener = tokio::net::TcpListener::bind(&bind)
                .await
                .map_err(|e| CliError::new("io-error", format!("{bind}: {e}")))?;
            eprintln!("listening on http://{}", listener.local_addr().map(|a| a.to_string()).unwrap_or(bind));
            crate::service::serve(listener, state).await.map_err(|e| CliError::new("io-error", e.to_string()))
        }
    });
    // Drop the runtime before the last handle on the blocking client.
    drop(runtime);
    drop(state);
    served.map(|()| String::new())
}
