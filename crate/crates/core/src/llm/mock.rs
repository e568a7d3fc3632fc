//! Deterministic offline backend.
//!
//! Every reply is a pure function of the role and the request:
//!
//! * detector: finds the value specification rendered into the prompt and
//!   names every value with a tag occurring (case-insensitively) in the text
//!   under analysis, which is the last non-repair user message;
//! * critic: reads the `{"text", "detected_values"}` object from the prompt
//!   and rates each value `Mild support` with a fixed justification;
//! * conceptualizer: has no built-in behaviour and answers from a
//!   [`MockScript`], or with prose when none is configured.
//!
//! Scripts override the built-in behaviour for any role. A garble trigger
//! makes detector and critic answer with prose for texts containing it,
//! which exercises the parse-failure paths.

use std::collections::HashMap;
use std::time::Duration;

use serde_json::Value;

use super::{request_hash, ChatBackend, ChatRequest, GatewayError, LlmRole, MessageRole, RoleId, REPAIR_PREFIX};
use crate::intensity::IntensityLevel;
use crate::json_extract::{balanced_spans, Bracket};
use crate::value_spec::{decode_generated, ValueTheorySpec};

pub const MOCK_JUSTIFICATION_PREFIX: &str = "Mock critic:";

/// Fixed replies for the first ask and for the repair re-ask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MockScript {
    pub initial: String,
    pub repair: Option<String>,
}

impl MockScript {
    pub fn always(text: impl Into<String>) -> Self {
        Self { initial: text.into(), repair: None }
    }

    pub fn then_repair(initial: impl Into<String>, repair: impl Into<String>) -> Self {
        Self { initial: initial.into(), repair: Some(repair.into()) }
    }
}

#[derive(Clone, Debug, Default)]
pub struct MockBackend {
    scripts: HashMap<RoleId, MockScript>,
    garble_trigger: Option<String>,
    max_latency: Option<Duration>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_script(mut self, role: RoleId, script: MockScript) -> Self {
        self.scripts.insert(role, script);
        self
    }

    pub fn with_garble_trigger(mut self, trigger: impl Into<String>) -> Self {
        self.garble_trigger = Some(trigger.into());
        self
    }

    /// Sleeps up to `max` per call, derived from the request hash, so that
    /// concurrent batches complete out of order.
    pub fn with_simulated_latency(mut self, max: Duration) -> Self {
        self.max_latency = Some(max);
        self
    }

    fn garbled(&self, text: &str) -> bool {
        self.garble_trigger.as_deref().is_some_and(|t| !t.is_empty() && text.contains(t))
    }
}

fn is_repair(request: &ChatRequest) -> bool {
    request.messages.last().is_some_and(|m| m.role == MessageRole::User && m.content.starts_with(REPAIR_PREFIX))
}

/// The last user message that is not a repair instruction.
fn subject_text(request: &ChatRequest) -> Option<&str> {
    request
        .messages
        .iter()
        .rev()
        .filter(|m| m.role == MessageRole::User && !m.content.starts_with(REPAIR_PREFIX))
        .map(|m| m.content.as_str())
        .next()
}

fn prompt_objects(request: &ChatRequest) -> impl Iterator<Item = Value> + '_ {
    request
        .messages
        .iter()
        .filter(|m| !m.content.starts_with(REPAIR_PREFIX))
        .flat_map(|m| balanced_spans(&m.content, Bracket::Object))
        .filter_map(|span| serde_json::from_str::<Value>(span).ok())
}

fn embedded_spec(request: &ChatRequest) -> Option<ValueTheorySpec> {
    prompt_objects(request)
        .filter(|v| v.get("values").is_some())
        .find_map(|v| decode_generated(&v, "").ok())
        .filter(|s| !s.values.is_empty())
}

/// Value names whose tags occur in `text`, in spec order.
pub(crate) fn tag_matches(spec: &ValueTheorySpec, text: &str) -> Vec<String> {
    let haystack = text.to_lowercase();
    spec.values
        .iter()
        .filter(|v| {
            v.tags.iter().any(|t| {
                let needle = t.text.trim().to_lowercase();
                !needle.is_empty() && haystack.contains(&needle)
            })
        })
        .map(|v| v.name.clone())
        .collect()
}

impl MockBackend {
    fn detect(&self, request: &ChatRequest) -> String {
        let Some(text) = subject_text(request) else {
            return "There is no text to analyse.".into();
        };
        if self.garbled(text) {
            return "I am unable to provide a structured answer for this text.".into();
        }
        let Some(spec) = embedded_spec(request) else {
            return "The prompt does not contain a value specification.".into();
        };
        let names = tag_matches(&spec, text);
        format!("Detected values:\n```json\n{}\n```\n", serde_json::to_string(&names).expect("strings serialize"))
    }

    fn critique(&self, request: &ChatRequest) -> String {
        let labelled = prompt_objects(request).find(|v| v.get("detected_values").is_some_and(Value::is_array));
        let Some(labelled) = labelled else {
            return "The prompt does not contain a labelled text.".into();
        };
        let text = labelled.get("text").and_then(Value::as_str).unwrap_or_default();
        if self.garbled(text) {
            return "I cannot rate these values.".into();
        }
        let annotations: Vec<Value> = labelled["detected_values"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(Value::as_str)
            .map(|value| {
                serde_json::json!({
                    "value": value,
                    "level": IntensityLevel::MildSupport.label(),
                    "justification": format!("{MOCK_JUSTIFICATION_PREFIX} the text refers to {value} without elaboration."),
                })
            })
            .collect();
        format!("```json\n{}\n```\n", serde_json::to_string_pretty(&annotations).expect("json values serialize"))
    }
}

impl ChatBackend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn send(&self, role: &LlmRole, request: &ChatRequest) -> Result<String, GatewayError> {
        if let Some(max) = self.max_latency {
            let hash = request_hash(request);
            let byte = u8::from_str_radix(&hash[..2], 16).unwrap_or(0);
            std::thread::sleep(max.mul_f64(f64::from(byte) / 255.0));
        }
        if let Some(script) = self.scripts.get(&role.role_id) {
            let reply = match (&script.repair, is_repair(request)) {
                (Some(repair), true) => repair,
                _ => &script.initial,
            };
            return Ok(reply.clone());
        }
        Ok(match role.role_id {
            RoleId::Detector => self.detect(request),
            RoleId::Critic => self.critique(request),
            RoleId::Conceptualizer => "No conceptualization fixture is configured for this mock.".into(),
        })
    }
}
