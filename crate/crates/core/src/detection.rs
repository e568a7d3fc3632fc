//! Stage two, first pass: label a text with the set of values it refers to.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::json_extract::{extract_json, Bracket};
use crate::llm::{complete_with_repair, ChatRequest, Gateway, GatewayError, LlmRole, RoleId};
use crate::template::{builtin, PromptTemplate, TemplateError};
use crate::value_spec::{ensure_valid, render_for_prompt, SpecError, Taxonomy, ValueTheorySpec};

pub const PLACEHOLDERS: &[&str] = &["value_spec", "input_text"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("empty-text: the text to analyse is empty")]
    EmptyText,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("no-json-found: the answer contains no JSON list of value names")]
    NoJsonFound,
    #[error("unknown-value: {0:?} is not in the value specification")]
    UnknownValue(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl DetectionError {
    pub fn code(&self) -> &'static str {
        match self {
            DetectionError::EmptyText => "empty-text",
            DetectionError::Template(e) => e.code(),
            DetectionError::Spec(e) => e.code(),
            DetectionError::NoJsonFound => "no-json-found",
            DetectionError::UnknownValue(_) => "unknown-value",
            DetectionError::Gateway(e) => e.code(),
        }
    }
}

/// What to do with value names the model invents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownNamePolicy {
    #[default]
    Strict,
    Lenient,
}

/// A text to analyse. Carries no gold labels, so nothing downstream of it
/// can leak them into a prompt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextInput {
    pub text_id: String,
    pub text: String,
}

impl TextInput {
    pub fn new(text_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self { text_id: text_id.into(), text: text.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionLabel {
    pub text_id: String,
    pub detected: BTreeSet<String>,
    #[serde(default)]
    pub raw_response: String,
}

/// One line of a predictions file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub text_id: String,
    pub detected: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
}

impl DetectionLabel {
    pub fn to_record(&self, include_raw: bool) -> PredictionRecord {
        PredictionRecord {
            text_id: self.text_id.clone(),
            detected: self.detected.iter().cloned().collect(),
            raw_response: include_raw.then(|| self.raw_response.clone()),
        }
    }
}

impl From<PredictionRecord> for DetectionLabel {
    fn from(r: PredictionRecord) -> Self {
        Self {
            text_id: r.text_id,
            detected: r.detected.into_iter().collect(),
            raw_response: r.raw_response.unwrap_or_default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedDetection {
    pub values: BTreeSet<String>,
    /// Names dropped under the lenient policy.
    pub dropped: Vec<String>,
}

pub fn default_template() -> PromptTemplate {
    PromptTemplate::new("detection", builtin::DETECTION, PLACEHOLDERS).expect("built-in detection template is valid")
}

pub fn build_detection_prompt(
    template: &PromptTemplate,
    spec: &ValueTheorySpec,
    text: &str,
) -> Result<ChatRequest, DetectionError> {
    ensure_valid(spec)?;
    if text.trim().is_empty() {
        return Err(DetectionError::EmptyText);
    }
    Ok(template.render(&[("value_spec", &render_for_prompt(spec)), ("input_text", text)])?)
}

fn names_from_object(v: &Value) -> Option<Vec<String>> {
    ["values", "detected", "detected_values"]
        .iter()
        .find_map(|k| v.get(k)?.as_array()?.iter().map(|n| n.as_str().map(str::to_string)).collect::<Option<Vec<_>>>())
}

pub fn parse_detection(
    response_text: &str,
    taxonomy: &Taxonomy,
    policy: UnknownNamePolicy,
) -> Result<ParsedDetection, DetectionError> {
    let names = extract_json::<Vec<String>>(response_text, Bracket::Array)
        .or_else(|| extract_json::<Value>(response_text, Bracket::Object).and_then(|v| names_from_object(&v)))
        .ok_or(DetectionError::NoJsonFound)?;
    let mut parsed = ParsedDetection::default();
    for name in names {
        match taxonomy.canonicalize(&name) {
            Ok(canonical) => {
                parsed.values.insert(canonical.to_string());
            }
            Err(_) if policy == UnknownNamePolicy::Lenient => {
                tracing::warn!(value = %name, "dropping value name outside the specification");
                parsed.dropped.push(name);
            }
            Err(_) => return Err(DetectionError::UnknownValue(name)),
        }
    }
    Ok(parsed)
}

pub fn detect_values(
    gateway: &Gateway,
    input: &TextInput,
    spec: &ValueTheorySpec,
    template: &PromptTemplate,
    role: &LlmRole,
    policy: UnknownNamePolicy,
) -> Result<DetectionLabel, DetectionError> {
    role.expect(RoleId::Detector)?;
    let taxonomy = spec.taxonomy()?;
    let request = role.bind(build_detection_prompt(template, spec, &input.text)?);
    let outcome = complete_with_repair(gateway, role, &request, |text| parse_detection(text, &taxonomy, policy))?;
    let raw_response = outcome.final_exchange().response_text.clone();
    Ok(DetectionLabel { text_id: input.text_id.clone(), detected: outcome.value.values, raw_response })
}
