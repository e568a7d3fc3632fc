//! Provider-neutral chat completion.
//!
//! A [`Gateway`] routes each request to the backend named by the calling
//! [`LlmRole`]: a live HTTP endpoint, the deterministic [`MockBackend`], or
//! either of those behind the persistent [`ResponseCache`]. Transient live
//! failures are retried with exponential backoff.

mod cache;
mod limiter;
mod live;
mod mock;
mod repair;
mod retry;

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::ResponseCache;
pub use limiter::InflightLimiter;
pub use live::{LiveBackend, LiveConfig, API_KEY_ENV, DEFAULT_BASE_URL};
pub use mock::{MockBackend, MockScript, MOCK_JUSTIFICATION_PREFIX};
pub use repair::{complete_with_repair, repair_request, Repaired, REPAIR_PREFIX};
pub use retry::RetryPolicy;

pub const DEFAULT_MODEL_ID: &str = "meta-llama/llama-4-scout-17b-16e-instruct";
pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_INFLIGHT_LIMIT: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("invalid-request: {0}")]
    InvalidRequest(String),
    #[error("auth-error: {0}")]
    Auth(String),
    #[error("rate-limited: {0}")]
    RateLimited(String),
    #[error("network-error: {0}")]
    Network(String),
    #[error("http-error: status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("empty-response")]
    EmptyResponse,
    #[error("backend-unavailable: {0}")]
    BackendUnavailable(String),
    #[error("cache-error: {0}")]
    Cache(String),
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::InvalidRequest(_) => "invalid-request",
            GatewayError::Auth(_) => "auth-error",
            GatewayError::RateLimited(_) => "rate-limited",
            GatewayError::Network(_) => "network-error",
            GatewayError::Http { .. } => "http-error",
            GatewayError::EmptyResponse => "empty-response",
            GatewayError::BackendUnavailable(_) => "backend-unavailable",
            GatewayError::Cache(_) => "cache-error",
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::RateLimited(_) | GatewayError::Network(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageRole {
    System,
    User,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl Default for ChatRequest {
    fn default() -> Self {
        Self {
            model_id: DEFAULT_MODEL_ID.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            messages: Vec::new(),
            max_tokens: None,
        }
    }
}

impl ChatRequest {
    pub fn push(mut self, role: MessageRole, content: impl Into<String>) -> Self {
        self.messages.push(ChatMessage { role, content: content.into() });
        self
    }

    pub fn system(self, content: impl Into<String>) -> Self {
        self.push(MessageRole::System, content)
    }

    pub fn user(self, content: impl Into<String>) -> Self {
        self.push(MessageRole::User, content)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("messages are empty".into()));
        }
        if let Some(i) = self.messages.iter().position(|m| m.content.is_empty()) {
            return Err(GatewayError::InvalidRequest(format!("message {i} has empty content")));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.model_id.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("model_id is empty".into()));
        }
        if self.max_tokens == Some(0) {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Content of the last user message, if any.
    pub fn last_user_content(&self) -> Option<&str> {
        self.messages.iter().rev().find(|m| m.role == MessageRole::User).map(|m| m.content.as_str())
    }
}

/// Stable SHA-256 over model id, temperature and the ordered messages.
pub fn request_hash(request: &ChatRequest) -> String {
    #[derive(Serialize)]
    struct Keyed<'a> {
        model_id: &'a str,
        temperature: f64,
        messages: &'a [ChatMessage],
    }
    let keyed = Keyed { model_id: &request.model_id, temperature: request.temperature, messages: &request.messages };
    let bytes = serde_json::to_vec(&keyed).expect("request is serializable");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleId {
    Conceptualizer,
    Detector,
    Critic,
}

impl fmt::Display for RoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoleId::Conceptualizer => "conceptualizer",
            RoleId::Detector => "detector",
            RoleId::Critic => "critic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BackendSelector {
    #[serde(rename = "live")]
    Live,
    #[serde(rename = "mock")]
    Mock,
    #[serde(rename = "cached(live)")]
    CachedLive,
    #[serde(rename = "cached(mock)")]
    CachedMock,
}

impl BackendSelector {
    pub fn is_cached(self) -> bool {
        matches!(self, BackendSelector::CachedLive | BackendSelector::CachedMock)
    }

    pub fn is_live(self) -> bool {
        matches!(self, BackendSelector::Live | BackendSelector::CachedLive)
    }
}

impl std::str::FromStr for BackendSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "live" => Ok(BackendSelector::Live),
            "mock" => Ok(BackendSelector::Mock),
            "cached(live)" | "cached-live" => Ok(BackendSelector::CachedLive),
            "cached(mock)" | "cached-mock" => Ok(BackendSelector::CachedMock),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

/// One pipeline stage's model binding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmRole {
    pub role_id: RoleId,
    pub model_id: String,
    pub temperature: f64,
    pub backend: BackendSelector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl LlmRole {
    pub fn new(role_id: RoleId, backend: BackendSelector) -> Self {
        Self {
            role_id,
            model_id: DEFAULT_MODEL_ID.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            backend,
            max_tokens: None,
        }
    }

    pub fn mock(role_id: RoleId) -> Self {
        Self::new(role_id, BackendSelector::Mock)
    }

    /// Stamps this role's model settings onto a prompt-built request.
    pub fn bind(&self, mut request: ChatRequest) -> ChatRequest {
        request.model_id = self.model_id.clone();
        request.temperature = self.temperature;
        request.max_tokens = self.max_tokens;
        request
    }

    pub fn expect(&self, role_id: RoleId) -> Result<(), GatewayError> {
        if self.role_id == role_id {
            Ok(())
        } else {
            Err(GatewayError::InvalidRequest(format!("stage needs the {role_id} role, got {}", self.role_id)))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChatExchange {
    pub request: ChatRequest,
    pub response_text: String,
    pub backend_id: String,
    pub latency_ms: u64,
    pub cache_hit: bool,
}

/// Something that turns a chat request into response text.
pub trait ChatBackend: Send + Sync {
    fn id(&self) -> &str;
    fn send(&self, role: &LlmRole, request: &ChatRequest) -> Result<String, GatewayError>;
}

pub struct Gateway {
    live: Option<Arc<dyn ChatBackend>>,
    mock: Arc<dyn ChatBackend>,
    cache: Option<Arc<ResponseCache>>,
    retry: RetryPolicy,
    limiter: InflightLimiter,
}

impl Gateway {
    /// A gateway with only the default mock backend and no cache.
    pub fn mock() -> Self {
        Self::new(Arc::new(MockBackend::default()))
    }

    pub fn new(mock: Arc<dyn ChatBackend>) -> Self {
        Self {
            live: None,
            mock,
            cache: None,
            retry: RetryPolicy::default(),
            limiter: InflightLimiter::new(DEFAULT_INFLIGHT_LIMIT),
        }
    }

    pub fn with_live(mut self, live: Arc<dyn ChatBackend>) -> Self {
        self.live = Some(live);
        self
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_inflight_limit(mut self, limit: usize) -> Self {
        self.limiter = InflightLimiter::new(limit);
        self
    }

    pub fn cache(&self) -> Option<&Arc<ResponseCache>> {
        self.cache.as_ref()
    }

    pub fn complete(&self, role: &LlmRole, request: &ChatRequest) -> Result<ChatExchange, GatewayError> {
        request.validate()?;
        let started = Instant::now();
        let backend = self.backend_for(role.backend)?;

        let cache = if role.backend.is_cached() {
            Some(self.cache.as_ref().ok_or_else(|| {
                GatewayError::BackendUnavailable("cached backend selected but no cache configured".into())
            })?)
        } else {
            None
        };
        let hash = request_hash(request);
        if let Some(hit) = cache.and_then(|c| c.get(&hash)) {
            return Ok(ChatExchange {
                request: request.clone(),
                response_text: hit,
                backend_id: backend.id().to_string(),
                latency_ms: started.elapsed().as_millis() as u64,
                cache_hit: true,
            });
        }

        let text = self.retry.run(|| {
            let _permit = role.backend.is_live().then(|| self.limiter.acquire());
            backend.send(role, request)
        })?;
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyResponse);
        }
        if let Some(cache) = cache {
            cache.put(&hash, request, &text)?;
        }
        Ok(ChatExchange {
            request: request.clone(),
            response_text: text,
            backend_id: backend.id().to_string(),
            latency_ms: started.elapsed().as_millis() as u64,
            cache_hit: false,
        })
    }

    fn backend_for(&self, selector: BackendSelector) -> Result<&Arc<dyn ChatBackend>, GatewayError> {
        if selector.is_live() {
            self.live.as_ref().ok_or_else(|| GatewayError::BackendUnavailable("no live backend configured".into()))
        } else {
            Ok(&self.mock)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::time::Duration;

    fn req() -> ChatRequest {
        ChatRequest::default().system("You label values.").user("Hello there.")
    }

    #[test]
    fn default_temperature_is_zero() {
        assert_eq!(ChatRequest::default().temperature, 0.0);
        assert_eq!(LlmRole::mock(RoleId::Detector).temperature, 0.0);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        assert_eq!(request_hash(&req()), request_hash(&req()));
        let mut warm = req();
        warm.temperature = 0.7;
        assert_ne!(request_hash(&req()), request_hash(&warm));
        let swapped = ChatRequest::default().user("Hello there.").system("You label values.");
        assert_ne!(request_hash(&req()), request_hash(&swapped));
        let mut other_model = req();
        other_model.model_id = "other".into();
        assert_ne!(request_hash(&req()), request_hash(&other_model));
    }

    #[test]
    fn invalid_requests_are_rejected() {
        let gw = Gateway::mock();
        let role = LlmRole::mock(RoleId::Detector);
        assert_eq!(gw.complete(&role, &ChatRequest::default()).unwrap_err().code(), "invalid-request");
        let empty = ChatRequest::default().user("");
        assert_eq!(gw.complete(&role, &empty).unwrap_err().code(), "invalid-request");
        let mut hot = req();
        hot.temperature = 2.5;
        assert_eq!(gw.complete(&role, &hot).unwrap_err().code(), "invalid-request");
    }

    #[test]
    fn mock_is_deterministic() {
        let gw = Gateway::mock();
        let role = LlmRole::mock(RoleId::Detector);
        let a = gw.complete(&role, &req()).unwrap();
        let b = gw.complete(&role, &req()).unwrap();
        assert_eq!(a.response_text, b.response_text);
        assert!(!a.cache_hit);
        assert_eq!(a.backend_id, "mock");
    }

    #[test]
    fn cached_mock_hits_on_second_call() {
        let gw = Gateway::mock().with_cache(Arc::new(ResponseCache::in_memory()));
        let role = LlmRole::new(RoleId::Detector, BackendSelector::CachedMock);
        let a = gw.complete(&role, &req()).unwrap();
        let b = gw.complete(&role, &req()).unwrap();
        assert!(!a.cache_hit);
        assert!(b.cache_hit);
        assert_eq!(a.response_text, b.response_text);
    }

    #[test]
    fn cached_selector_without_cache_is_a_configuration_error() {
        let gw = Gateway::mock();
        let role = LlmRole::new(RoleId::Detector, BackendSelector::CachedMock);
        assert_eq!(gw.complete(&role, &req()).unwrap_err().code(), "backend-unavailable");
    }

    struct Flaky {
        failures: usize,
        error: GatewayError,
        calls: AtomicUsize,
    }

    impl ChatBackend for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }
        fn send(&self, _: &LlmRole, _: &ChatRequest) -> Result<String, GatewayError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(self.error.clone())
            } else {
                Ok("ok".into())
            }
        }
    }

    fn fast_retry() -> RetryPolicy {
        RetryPolicy { initial_backoff: Duration::from_millis(1), ..RetryPolicy::default() }
    }

    #[test]
    fn transient_failures_are_retried() {
        let flaky =
            Arc::new(Flaky { failures: 2, error: GatewayError::Network("reset".into()), calls: AtomicUsize::new(0) });
        let gw = Gateway::mock().with_live(flaky.clone()).with_retry(fast_retry());
        let role = LlmRole::new(RoleId::Detector, BackendSelector::Live);
        assert_eq!(gw.complete(&role, &req()).unwrap().response_text, "ok");
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn retries_are_bounded() {
        let flaky = Arc::new(Flaky {
            failures: 10,
            error: GatewayError::RateLimited("429".into()),
            calls: AtomicUsize::new(0),
        });
        let gw = Gateway::mock().with_live(flaky.clone()).with_retry(fast_retry());
        let role = LlmRole::new(RoleId::Detector, BackendSelector::Live);
        assert_eq!(gw.complete(&role, &req()).unwrap_err().code(), "rate-limited");
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn auth_errors_are_not_retried() {
        let flaky =
            Arc::new(Flaky { failures: 10, error: GatewayError::Auth("401".into()), calls: AtomicUsize::new(0) });
        let gw = Gateway::mock().with_live(flaky.clone()).with_retry(fast_retry());
        let role = LlmRole::new(RoleId::Detector, BackendSelector::Live);
        assert_eq!(gw.complete(&role, &req()).unwrap_err().code(), "auth-error");
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn blank_backend_text_is_empty_response() {
        struct Blank;
        impl ChatBackend for Blank {
            fn id(&self) -> &str {
                "blank"
            }
            fn send(&self, _: &LlmRole, _: &ChatRequest) -> Result<String, GatewayError> {
                Ok("  \n".into())
            }
        }
        let gw = Gateway::new(Arc::new(Blank));
        assert_eq!(gw.complete(&LlmRole::mock(RoleId::Critic), &req()).unwrap_err(), GatewayError::EmptyResponse);
    }

    #[test]
    fn live_selector_without_backend() {
        let gw = Gateway::mock();
        let role = LlmRole::new(RoleId::Detector, BackendSelector::Live);
        assert_eq!(gw.complete(&role, &req()).unwrap_err().code(), "backend-unavailable");
    }

    #[test]
    fn selector_parsing() {
        assert_eq!("cached(live)".parse::<BackendSelector>().unwrap(), BackendSelector::CachedLive);
        assert_eq!(serde_json::to_string(&BackendSelector::CachedMock).unwrap(), "\"cached(mock)\"");
        assert!("remote".parse::<BackendSelector>().is_err());
    }
}
