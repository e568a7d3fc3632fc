//! HTTP backend for any endpoint speaking the OpenAI-style chat-completions
//! protocol (Groq, vLLM, llama.cpp server, ...).

use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use super::{ChatBackend, ChatMessage, ChatRequest, GatewayError, LlmRole};

pub const API_KEY_ENV: &str = "VALUELENS_API_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.groq.com/openai/v1";

#[derive(Clone, Debug)]
pub struct LiveConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl LiveConfig {
    /// Base URL as given, credential from `VALUELENS_API_KEY`.
    pub fn from_env(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.trim().is_empty()),
            timeout: Duration::from_secs(120),
        }
    }
}

pub struct LiveBackend {
    id: String,
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [ChatMessage],
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::BackendUnavailable(e.to_string()))?;
        let base = config.base_url.trim_end_matches('/');
        Ok(Self {
            id: format!("live:{base}"),
            endpoint: format!("{base}/chat/completions"),
            api_key: config.api_key,
            client,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

fn classify_status(status: u16, body: String) -> GatewayError {
    match status {
        401 | 403 => GatewayError::Auth(format!("status {status}: {body}")),
        429 => GatewayError::RateLimited(body),
        408 | 500..=599 => GatewayError::Network(format!("status {status}: {body}")),
        _ => GatewayError::Http { status, body },
    }
}

fn response_content(body: &Value) -> Option<&str> {
    body.get("choices")?.get(0)?.get("message")?.get("content")?.as_str()
}

impl ChatBackend for LiveBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn send(&self, _role: &LlmRole, request: &ChatRequest) -> Result<String, GatewayError> {
        let Some(key) = self.api_key.as_deref() else {
            return Err(GatewayError::Auth(format!("{API_KEY_ENV} is not set")));
        };
        let wire = WireRequest {
            model: &request.model_id,
            temperature: request.temperature,
            messages: &request.messages,
            max_tokens: request.max_tokens,
        };
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(key)
            .json(&wire)
            .send()
            .map_err(|e| GatewayError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| GatewayError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, text));
        }
        let body: Value = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Http { status, body: format!("unparseable body: {e}") })?;
        match response_content(&body) {
            Some(content) if !content.trim().is_empty() => Ok(content.to_string()),
            _ => Err(GatewayError::EmptyResponse),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::RoleId;

    #[test]
    fn missing_credential_fails_before_any_request() {
        // Port 9 (discard) is never contacted: the key check comes first.
        let backend = LiveBackend::new(LiveConfig {
            base_url: "http://127.0.0.1:9".into(),
            api_key: None,
            timeout: Duration::from_millis(50),
        })
        .unwrap();
        let err = backend.send(&LlmRole::mock(RoleId::Detector), &ChatRequest::default().user("x")).unwrap_err();
        assert_eq!(err.code(), "auth-error");
    }

    #[test]
    fn status_classes() {
        assert_eq!(classify_status(401, String::new()).code(), "auth-error");
        assert_eq!(classify_status(429, String::new()).code(), "rate-limited");
        assert_eq!(classify_status(503, String::new()).code(), "network-error");
        assert_eq!(classify_status(400, String::new()).code(), "http-error");
        assert!(!classify_status(400, String::new()).is_retryable());
    }

    #[test]
    fn endpoint_joins_base_url() {
        let backend = LiveBackend::new(LiveConfig::from_env("http://localhost:8080/v1/")).unwrap();
        assert_eq!(backend.endpoint(), "http://localhost:8080/v1/chat/completions");
    }
}
