//! HTTP API for spec curation and text analysis.
//!
//! | Method | Path | |
//! |---|---|---|
//! | GET | `/api/spec` | current spec and version, version also as `ETag` |
//! | PUT | `/api/spec/revisions` | apply one expert revision; base version from `If-Match` or `base_version` |
//! | POST | `/api/analyze` | enqueue `{text, text_id?}`, returns `202` with a job id |
//! | GET | `/api/jobs/{id}` | job state and progress |
//! | GET | `/api/results/{id}` | the analyzed text of a finished job |
//!
//! Errors are `{"error": {"code", "message"}}` with status 400 (malformed
//! body), 404 (unknown job), 409 (stale version, job not finished) or 422
//! (revision rejected).

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex as StdMutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{Mutex, Semaphore};
use uuid::Uuid;

use crate::clock::Clock;
use crate::detection::{detect_values, TextInput, UnknownNamePolicy};
use crate::intensity::{analyze_intensity, AnalyzedText};
use crate::llm::{Gateway, LlmRole};
use crate::template::PromptTemplate;
use crate::value_spec::{apply_revision, serialize_spec, ExpertRevision, RevisionOp, ValueTheorySpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn can_advance_to(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running) | (JobState::Running, JobState::Done | JobState::Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobError {
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub completed: u32,
    pub total: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisJob {
    pub job_id: String,
    pub text_id: String,
    pub state: JobState,
    /// Every state the job has been in, oldest first.
    pub history: Vec<JobState>,
    pub progress: Progress,
    pub spec_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<JobError>,
}

impl AnalysisJob {
    fn advance(&mut self, next: JobState) {
        assert!(self.state.can_advance_to(next), "job {} cannot go from {:?} to {:?}", self.job_id, self.state, next);
        self.state = next;
        self.history.push(next);
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecResponse {
    pub version: u64,
    pub spec: ValueTheorySpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RevisionBody {
    #[serde(default)]
    base_version: Option<u64>,
    target: String,
    operation: RevisionOp,
    payload: String,
    author: String,
    #[serde(default)]
    timestamp: Option<DateTime<Utc>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalyzeBody {
    text: String,
    #[serde(default)]
    text_id: Option<String>,
}

/// Models, templates and policy used by analysis jobs.
pub struct AnalysisSetup {
    pub gateway: Arc<Gateway>,
    pub detection_template: PromptTemplate,
    pub intensity_template: PromptTemplate,
    pub detector: LlmRole,
    pub critic: LlmRole,
    pub policy: UnknownNamePolicy,
    /// Jobs that may run at once.
    pub workers: usize,
}

struct SpecStore {
    spec: Arc<ValueTheorySpec>,
    path: Option<PathBuf>,
}

pub struct AppState {
    spec: Mutex<SpecStore>,
    setup: Arc<AnalysisSetup>,
    jobs: Arc<StdMutex<HashMap<String, AnalysisJob>>>,
    workers: Arc<Semaphore>,
    results_dir: PathBuf,
    clock: Arc<dyn Clock>,
}

impl AppState {
    /// `spec_path`, when given, receives every accepted revision; the
    /// revision records are appended to the sibling `*.revisions.jsonl`.
    pub fn new(
        spec: ValueTheorySpec,
        spec_path: Option<PathBuf>,
        setup: AnalysisSetup,
        results_dir: PathBuf,
        clock: Arc<dyn Clock>,
    ) -> std::io::Result<Self> {
        std::fs::create_dir_all(&results_dir)?;
        Ok(Self {
            spec: Mutex::new(SpecStore { spec: Arc::new(spec), path: spec_path }),
            workers: Arc::new(Semaphore::new(setup.workers.max(1))),
            setup: Arc::new(setup),
            jobs: Arc::default(),
            results_dir,
            clock,
        })
    }

    pub async fn current_spec(&self) -> Arc<ValueTheorySpec> {
        self.spec.lock().await.spec.clone()
    }

    pub fn job(&self, id: &str) -> Option<AnalysisJob> {
        self.jobs.lock().expect("job table lock").get(id).cloned()
    }
}

pub fn revisions_log_path(spec_path: &Path) -> PathBuf {
    spec_path.with_extension("revisions.jsonl")
}

struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: impl Into<String>, message: impl Into<String>) -> Self {
        Self { status, code: code.into(), message: message.into() }
    }

    fn malformed(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed-body", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "io-error", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

fn etag(version: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{version}\"")).expect("digits are a valid header")
}

fn parse_if_match(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    let Some(raw) = headers.get(header::IF_MATCH) else { return Ok(None) };
    let text = raw.to_str().map_err(|_| ApiError::malformed("If-Match is not ASCII"))?;
    let trimmed = text.trim().trim_start_matches("W/").trim_matches('"');
    trimmed.parse().map(Some).map_err(|_| ApiError::malformed(format!("If-Match {text:?} is not a spec version")))
}

fn spec_response(spec: &ValueTheorySpec) -> Response {
    let body = SpecResponse { version: spec.version, spec: spec.clone() };
    ([(header::ETAG, etag(spec.version))], Json(body)).into_response()
}

fn write_atomic(path: &Path, content: &str) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)
}

fn append_line(path: &Path, line: &str) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")
}

async fn get_spec(State(state): State<Arc<AppState>>) -> Response {
    spec_response(&*state.current_spec().await)
}

async fn put_revision(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let body: RevisionBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::malformed(format!("revision body: {e}")))?;
    let header_version = parse_if_match(&headers)?;
    let base = match (header_version, body.base_version) {
        (Some(h), Some(b)) if h != b => {
            return Err(ApiError::malformed(format!("If-Match {h} disagrees with base_version {b}")));
        }
        (Some(v), _) | (None, Some(v)) => v,
        (None, None) => return Err(ApiError::malformed("base version required: send If-Match or base_version")),
    };
    let revision = ExpertRevision {
        target: body.target,
        operation: body.operation,
        payload: body.payload,
        author: body.author,
        timestamp: body.timestamp.unwrap_or_else(|| state.clock.now()),
    };

    let mut store = state.spec.lock().await;
    if store.spec.version != base {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "stale-version",
            format!("revision based on version {base}, current version is {}", store.spec.version),
        ));
    }
    let next = apply_revision(&store.spec, &revision)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()))?;
    if let Some(path) = &store.path {
        let text = serialize_spec(&next).map_err(|e| ApiError::internal(e.to_string()))?;
        write_atomic(path, &text).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
        let record = json!({ "version": next.version, "revision": revision });
        let log = revisions_log_path(path);
        append_line(&log, &record.to_string()).map_err(|e| ApiError::internal(format!("{}: {e}", log.display())))?;
    }
    tracing::info!(version = next.version, target = %revision.target, op = ?revision.operation, "spec revised");
    store.spec = Arc::new(next);
    Ok(spec_response(&store.spec))
}

fn update_job(jobs: &StdMutex<HashMap<String, AnalysisJob>>, id: &str, f: impl FnOnce(&mut AnalysisJob)) {
    if let Some(job) = jobs.lock().expect("job table lock").get_mut(id) {
        f(job);
    }
}

fn run_analysis(
    setup: &AnalysisSetup,
    spec: &ValueTheorySpec,
    input: &TextInput,
    on_detected: impl FnOnce(),
) -> Result<AnalyzedText, JobError> {
    let fail = |code: &str, message: String| JobError { code: code.to_string(), message };
    let label = detect_values(&setup.gateway, input, spec, &setup.detection_template, &setup.detector, setup.policy)
        .map_err(|e| fail(e.code(), e.to_string()))?;
    on_detected();
    analyze_intensity(&setup.gateway, input, &label, spec, &setup.intensity_template, &setup.critic, setup.policy)
        .map_err(|e| fail(e.code(), e.to_string()))
}

async fn post_analyze(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let body: AnalyzeBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::malformed(format!("analyze body: {e}")))?;
    if body.text.trim().is_empty() {
        return Err(ApiError::malformed("text is empty"));
    }
    let job_id = Uuid::new_v4().to_string();
    let text_id = body.text_id.filter(|t| !t.trim().is_empty()).unwrap_or_else(|| job_id.clone());
    let spec = state.current_spec().await;
    let job = AnalysisJob {
        job_id: job_id.clone(),
        text_id: text_id.clone(),
        state: JobState::Queued,
        history: vec![JobState::Queued],
        progress: Progress { completed: 0, total: 2 },
        spec_version: spec.version,
        result: None,
        error: None,
    };
    state.jobs.lock().expect("job table lock").insert(job_id.clone(), job.clone());

    let (jobs, setup, workers) = (state.jobs.clone(), state.setup.clone(), state.workers.clone());
    let result_path = state.results_dir.join(format!("{job_id}.json"));
    let id = job_id.clone();
    tokio::spawn(async move {
        let _permit = workers.acquire_owned().await.expect("worker pool is never closed");
        update_job(&jobs, &id, |j| j.advance(JobState::Running));
        let input = TextInput::new(text_id, body.text);
        let progress_jobs = jobs.clone();
        let progress_id = id.clone();
        let outcome = tokio::task::spawn_blocking(move || {
            let analyzed = run_analysis(&setup, &spec, &input, || {
                update_job(&progress_jobs, &progress_id, |j| j.progress.completed = 1)
            })?;
            let mut text = serde_json::to_string_pretty(&analyzed).expect("analyzed texts serialize");
            text.push('\n');
            write_atomic(&result_path, &text)
                .map_err(|e| JobError { code: "io-error".into(), message: format!("{}: {e}", result_path.display()) })
        })
        .await
        .unwrap_or_else(|e| Err(JobError { code: "internal-error".into(), message: e.to_string() }));
        update_job(&jobs, &id, |j| match outcome {
            Ok(()) => {
                j.progress.completed = j.progress.total;
                j.result = Some(format!("/api/results/{}", j.job_id));
                j.advance(JobState::Done);
            }
            Err(e) => {
                tracing::warn!(job = %j.job_id, code = %e.code, "analysis failed");
                j.error = Some(e);
                j.advance(JobState::Failed);
            }
        });
    });
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

fn unknown_job(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "unknown-job", format!("no job {id:?}"))
}

async fn get_job(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<AnalysisJob>, ApiError> {
    state.job(&id).map(Json).ok_or_else(|| unknown_job(&id))
}

async fn get_result(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let job = state.job(&id).ok_or_else(|| unknown_job(&id))?;
    match job.state {
        JobState::Done => {}
        JobState::Failed => {
            let e = job.error.unwrap_or(JobError { code: "failed".into(), message: String::new() });
            return Err(ApiError::new(StatusCode::CONFLICT, e.code, e.message));
        }
        _ => {
            return Err(ApiError::new(StatusCode::CONFLICT, "job-not-finished", format!("job {id} is {:?}", job.state)))
        }
    }
    let path = state.results_dir.join(format!("{id}.json"));
    let text =
        tokio::fs::read_to_string(&path).await.map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/spec", get(get_spec))
        .route("/api/spec/revisions", put(put_revision))
        .route("/api/analyze", post(post_analyze))
        .route("/api/jobs/:id", get(get_job))
        .route("/api/results/:id", get(get_result))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr().ok(), "serving");
    axum::serve(listener, router(state)).await
}
