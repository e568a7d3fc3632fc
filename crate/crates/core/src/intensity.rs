//! Stage two, critic pass: rate how strongly a text promotes or demotes each
//! detected value, with a justification grounded in the text.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::detection::{DetectionLabel, TextInput, UnknownNamePolicy};
use crate::json_extract::{extract_json, Bracket};
use crate::llm::{complete_with_repair, ChatRequest, Gateway, GatewayError, LlmRole, RoleId};
use crate::template::{builtin, PromptTemplate, TemplateError};
use crate::value_spec::{render_for_prompt, SpecError, Taxonomy, ValueTheorySpec};

pub const PLACEHOLDERS: &[&str] = &["intensity_scale", "labelled_text"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntensityError {
    #[error("empty-text: the text to analyse is empty")]
    EmptyText,
    #[error("id-mismatch: label is for {label:?} but text is {text:?}")]
    IdMismatch { label: String, text: String },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("no-json-found: the answer contains no JSON list of ratings")]
    NoJsonFound,
    #[error("unknown-level: {0:?} is not an intensity level")]
    UnknownLevel(String),
    #[error("malformed-annotation: {0}")]
    MalformedAnnotation(String),
    #[error("empty-justification: rating for {0:?} has no justification")]
    EmptyJustification(String),
    #[error("value-set-mismatch: missing {missing:?}, unexpected {extra:?}")]
    ValueSetMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl IntensityError {
    pub fn code(&self) -> &'static str {
        match self {
            IntensityError::EmptyText => "empty-text",
            IntensityError::IdMismatch { .. } => "id-mismatch",
            IntensityError::Template(e) => e.code(),
            IntensityError::Spec(e) => e.code(),
            IntensityError::NoJsonFound => "no-json-found",
            IntensityError::UnknownLevel(_) => "unknown-level",
            IntensityError::MalformedAnnotation(_) => "malformed-annotation",
            IntensityError::EmptyJustification(_) => "empty-justification",
            IntensityError::ValueSetMismatch { .. } => "value-set-mismatch",
            IntensityError::Gateway(e) => e.code(),
        }
    }
}

/// The seven-level ordinal scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntensityLevel {
    StrongSupport,
    MildSupport,
    Neutral,
    MildResistance,
    StrongResistance,
    Reframing,
    NoValues,
}

impl IntensityLevel {
    pub const ALL: [IntensityLevel; 7] = [
        IntensityLevel::StrongSupport,
        IntensityLevel::MildSupport,
        IntensityLevel::Neutral,
        IntensityLevel::MildResistance,
        IntensityLevel::StrongResistance,
        IntensityLevel::Reframing,
        IntensityLevel::NoValues,
    ];

    pub fn label(self) -> &'static str {
        match self {
            IntensityLevel::StrongSupport => "Strong support",
            IntensityLevel::MildSupport => "Mild support",
            IntensityLevel::Neutral => "Neutral",
            IntensityLevel::MildResistance => "Mild resistance",
            IntensityLevel::StrongResistance => "Strong resistance",
            IntensityLevel::Reframing => "Reframing",
            IntensityLevel::NoValues => "No values",
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            IntensityLevel::StrongSupport => {
                "The text passionately promotes and defends the value, emphasising its importance. \
                 This value is central to the message, reinforced with emotional, moral, and logical urgency."
            }
            IntensityLevel::MildSupport => {
                "The text clearly but gently aligns with the value through positive mention or subtle \
                 endorsement, without significant elaboration, insistence, or emphasis."
            }
            IntensityLevel::Neutral => {
                "The text mentions the value without signalling any clear support or opposition. \
                 The tone is factual, balanced and incidental."
            }
            IntensityLevel::MildResistance => {
                "The text subtly questions, downplays, or introduces alternative perspectives to its value. \
                 This opposition is indirect, hedged, or expressed through soft scepticism."
            }
            IntensityLevel::StrongResistance => {
                "The text challenges, criticises, or undermines the value directly and forcefully. \
                 This includes explicit argumentation, a negative emotional tone, or repeated rejection."
            }
            IntensityLevel::Reframing => {
                "The text acknowledges its value but redirects its meaning and context. It introduces a \
                 new perspective that shifts emphasis without expressing outright support or opposition."
            }
            IntensityLevel::NoValues => "The text is technical or descriptive, lacking evaluative.",
        }
    }

    /// The full scale as a bullet list for prompts.
    pub fn scale_text() -> String {
        Self::ALL.iter().map(|l| format!("- {}: {}", l.label(), l.definition())).collect::<Vec<_>>().join("\n")
    }
}

impl fmt::Display for IntensityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for IntensityLevel {
    type Err = IntensityError;

    /// Case-insensitive match on the seven labels, ignoring outer whitespace.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim();
        Self::ALL
            .into_iter()
            .find(|l| l.label().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| IntensityError::UnknownLevel(s.to_string()))
    }
}

impl Serialize for IntensityLevel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for IntensityLevel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntensityAnnotation {
    pub text_id: String,
    pub value: String,
    pub level: IntensityLevel,
    pub justification: String,
}

/// A text with its detected values and their ratings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzedText {
    pub text_id: String,
    pub text: String,
    pub detection: DetectionLabel,
    pub annotations: Vec<IntensityAnnotation>,
    /// Set when nothing was detected; the text as a whole carries no values.
    pub no_values: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub value: String,
    pub level: IntensityLevel,
    pub justification: String,
}

/// One line of an analyzed-output file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzedRecord {
    pub text_id: String,
    pub detected: Vec<String>,
    pub annotations: Vec<AnnotationRecord>,
    pub no_values: bool,
}

impl AnalyzedText {
    pub fn annotated_values(&self) -> BTreeSet<String> {
        self.annotations.iter().map(|a| a.value.clone()).collect()
    }

    /// True when the annotated values are exactly the detected values.
    pub fn is_consistent(&self) -> bool {
        self.annotated_values() == self.detection.detected && self.annotations.len() == self.detection.detected.len()
    }

    pub fn to_record(&self) -> AnalyzedRecord {
        AnalyzedRecord {
            text_id: self.text_id.clone(),
            detected: self.detection.detected.iter().cloned().collect(),
            annotations: self
                .annotations
                .iter()
                .map(|a| AnnotationRecord {
                    value: a.value.clone(),
                    level: a.level,
                    justification: a.justification.clone(),
                })
                .collect(),
            no_values: self.no_values,
        }
    }

    /// The detection label minus values the critic rated `No values`.
    pub fn critic_filtered_label(&self) -> DetectionLabel {
        let dropped: BTreeSet<&str> =
            self.annotations.iter().filter(|a| a.level == IntensityLevel::NoValues).map(|a| a.value.as_str()).collect();
        DetectionLabel {
            text_id: self.text_id.clone(),
            detected: self.detection.detected.iter().filter(|v| !dropped.contains(v.as_str())).cloned().collect(),
            raw_response: self.detection.raw_response.clone(),
        }
    }
}

impl From<AnalyzedRecord> for DetectionLabel {
    fn from(r: AnalyzedRecord) -> Self {
        DetectionLabel { text_id: r.text_id, detected: r.detected.into_iter().collect(), raw_response: String::new() }
    }
}

pub fn default_template() -> PromptTemplate {
    PromptTemplate::new("intensity", builtin::INTENSITY, PLACEHOLDERS).expect("built-in intensity template is valid")
}

fn labelled_text_json(label: &DetectionLabel, text: &str) -> String {
    let doc = serde_json::json!({
        "text_id": label.text_id,
        "text": text,
        "detected_values": label.detected.iter().collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&doc).expect("json values serialize")
}

pub fn build_intensity_prompt(
    template: &PromptTemplate,
    label: &DetectionLabel,
    text: &str,
    spec: &ValueTheorySpec,
) -> Result<ChatRequest, IntensityError> {
    if text.trim().is_empty() {
        return Err(IntensityError::EmptyText);
    }
    Ok(template.render(&[
        ("intensity_scale", &IntensityLevel::scale_text()),
        ("labelled_text", &labelled_text_json(label, text)),
        ("value_spec", &render_for_prompt(spec)),
    ])?)
}

fn rating_list(response_text: &str) -> Option<Vec<Value>> {
    extract_json::<Vec<Value>>(response_text, Bracket::Array)
        .filter(|items| items.iter().all(Value::is_object))
        .or_else(|| {
            let obj = extract_json::<Value>(response_text, Bracket::Object)?;
            ["annotations", "ratings", "values"]
                .iter()
                .find_map(|k| obj.get(k)?.as_array().cloned())
                .or_else(|| obj.get("level").is_some().then(|| vec![obj.clone()]))
        })
}

pub fn parse_intensity(
    response_text: &str,
    text_id: &str,
    expected: &BTreeSet<String>,
    taxonomy: &Taxonomy,
    policy: UnknownNamePolicy,
) -> Result<Vec<IntensityAnnotation>, IntensityError> {
    let items = rating_list(response_text).ok_or(IntensityError::NoJsonFound)?;
    let strict = policy == UnknownNamePolicy::Strict;
    let mut annotations: Vec<IntensityAnnotation> = Vec::new();
    let mut extra = Vec::new();
    for item in items {
        let level_raw = item
            .get("level")
            .and_then(Value::as_str)
            .ok_or_else(|| IntensityError::MalformedAnnotation(format!("missing level in {item}")))?;
        let level: IntensityLevel = level_raw.parse()?;
        let value_raw = match item.get("value") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.as_str(),
            // A bare "No values" rating describes the whole text.
            None | Some(Value::Null) if level == IntensityLevel::NoValues => continue,
            Some(Value::String(_)) if level == IntensityLevel::NoValues => continue,
            _ => return Err(IntensityError::MalformedAnnotation(format!("missing value in {item}"))),
        };
        let justification = item.get("justification").and_then(Value::as_str).unwrap_or_default().trim();
        let value = match taxonomy.canonicalize(value_raw) {
            Ok(v) if expected.contains(v) => v.to_string(),
            _ => {
                extra.push(value_raw.to_string());
                continue;
            }
        };
        if justification.is_empty() {
            return Err(IntensityError::EmptyJustification(value));
        }
        if annotations.iter().any(|a| a.value == value) {
            if strict {
                extra.push(value_raw.to_string());
            }
            continue;
        }
        annotations.push(IntensityAnnotation {
            text_id: text_id.to_string(),
            value,
            level,
            justification: justification.to_string(),
        });
    }
    let missing: Vec<String> =
        expected.iter().filter(|v| !annotations.iter().any(|a| &a.value == *v)).cloned().collect();
    if strict && (!missing.is_empty() || !extra.is_empty()) {
        return Err(IntensityError::ValueSetMismatch { missing, extra });
    }
    if !extra.is_empty() {
        tracing::warn!(?extra, "dropping ratings for values that were not detected");
    }
    annotations.sort_by(|a, b| a.value.cmp(&b.value));
    Ok(annotations)
}

pub fn analyze_intensity(
    gateway: &Gateway,
    input: &TextInput,
    label: &DetectionLabel,
    spec: &ValueTheorySpec,
    template: &PromptTemplate,
    role: &LlmRole,
    policy: UnknownNamePolicy,
) -> Result<AnalyzedText, IntensityError> {
    role.expect(RoleId::Critic)?;
    if label.text_id != input.text_id {
        return Err(IntensityError::IdMismatch { label: label.text_id.clone(), text: input.text_id.clone() });
    }
    let taxonomy = spec.taxonomy()?;
    let request = role.bind(build_intensity_prompt(template, label, &input.text, spec)?);
    let outcome = complete_with_repair(gateway, role, &request, |text| {
        parse_intensity(text, &input.text_id, &label.detected, &taxonomy, policy)
    })?;
    Ok(AnalyzedText {
        text_id: input.text_id.clone(),
        text: input.text.clone(),
        detection: label.clone(),
        annotations: outcome.value,
        no_values: label.detected.is_empty(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockBackend, MockScript, MOCK_JUSTIFICATION_PREFIX};
    use crate::value_spec::fixtures::schwartz_spec;
    use std::sync::Arc;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn label(names: &[&str]) -> DetectionLabel {
        DetectionLabel { text_id: "t1".into(), detected: set(names), raw_response: String::new() }
    }

    #[test]
    fn levels_parse_case_insensitively() {
        for level in IntensityLevel::ALL {
            assert_eq!(level.label().parse::<IntensityLevel>().unwrap(), level);
            assert_eq!(level.label().to_uppercase().parse::<IntensityLevel>().unwrap(), level);
            assert_eq!(format!("  {} ", level.label().to_lowercase()).parse::<IntensityLevel>().unwrap(), level);
        }
        assert_eq!("Somewhat support".parse::<IntensityLevel>().unwrap_err().code(), "unknown-level");
        assert!("StrongSupport".parse::<IntensityLevel>().is_err());
        assert_eq!(serde_json::to_string(&IntensityLevel::NoValues).unwrap(), "\"No values\"");
    }

    #[test]
    fn prompt_contains_values_scale_and_guidance() {
        let spec = schwartz_spec();
        let req =
            build_intensity_prompt(&default_template(), &label(&["Tradition", "Face"]), "Old ways.", &spec).unwrap();
        let all: String = req.messages.iter().map(|m| m.content.as_str()).collect();
        for needle in ["Tradition", "Face", "Old ways."] {
            assert!(all.contains(needle));
        }
        for level in IntensityLevel::ALL {
            assert!(all.contains(&format!("{}: {}", level.label(), level.definition())));
        }
        assert!(all.contains("rhetorical emphasis, emotional tone, framing, repetition, placement"));
    }

    #[test]
    fn empty_detection_prompt_asks_for_confirmation() {
        let req = build_intensity_prompt(&default_template(), &label(&[]), "A manual.", &schwartz_spec()).unwrap();
        let all: String = req.messages.iter().map(|m| m.content.as_str()).collect();
        assert!(all.contains("\"detected_values\": []"));
        assert!(all.contains("confirm that the text carries no values"));
    }

    #[test]
    fn template_without_scale_slot() {
        let err = PromptTemplate::new("bad", "{{labelled_text}}", PLACEHOLDERS).unwrap_err();
        assert_eq!(err, TemplateError::UnboundPlaceholder("intensity_scale".into()));
    }

    #[test]
    fn parse_examples() {
        let t = Taxonomy::schwartz();
        let ok = parse_intensity(
            r#"[{"value":"Tradition","level":"Strong support","justification":"Repeated praise of rituals."}]"#,
            "t1",
            &set(&["Tradition"]),
            &t,
            UnknownNamePolicy::Strict,
        )
        .unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(ok[0].level, IntensityLevel::StrongSupport);

        let bad_level = parse_intensity(
            r#"[{"value":"Tradition","level":"Somewhat support","justification":"x"}]"#,
            "t1",
            &set(&["Tradition"]),
            &t,
            UnknownNamePolicy::Strict,
        );
        assert_eq!(bad_level.unwrap_err().code(), "unknown-level");

        let extra = r#"[{"value":"Tradition","level":"Neutral","justification":"x"},
                        {"value":"Face","level":"Neutral","justification":"y"}]"#;
        assert_eq!(
            parse_intensity(extra, "t1", &set(&["Tradition"]), &t, UnknownNamePolicy::Strict).unwrap_err().code(),
            "value-set-mismatch"
        );
        assert_eq!(
            parse_intensity(extra, "t1", &set(&["Tradition"]), &t, UnknownNamePolicy::Lenient).unwrap().len(),
            1
        );

        let empty_just = r#"[{"value":"Tradition","level":"Neutral","justification":"  "}]"#;
        assert_eq!(
            parse_intensity(empty_just, "t1", &set(&["Tradition"]), &t, UnknownNamePolicy::Strict).unwrap_err().code(),
            "empty-justification"
        );
        let missing = r#"[]"#;
        assert_eq!(
            parse_intensity(missing, "t1", &set(&["Tradition"]), &t, UnknownNamePolicy::Strict).unwrap_err(),
            IntensityError::ValueSetMismatch { missing: vec!["Tradition".into()], extra: vec![] }
        );
        let marker = r#"[{"level": "No values", "justification": "A recipe."}]"#;
        assert!(parse_intensity(marker, "t1", &set(&[]), &t, UnknownNamePolicy::Strict).unwrap().is_empty());
    }

    #[test]
    fn mock_critic_rates_mild_support() {
        let gw = Gateway::mock();
        let spec = schwartz_spec();
        let analyzed = analyze_intensity(
            &gw,
            &TextInput::new("t1", "text"),
            &label(&["Hedonism", "Tradition"]),
            &spec,
            &default_template(),
            &LlmRole::mock(RoleId::Critic),
            UnknownNamePolicy::Strict,
        )
        .unwrap();
        assert_eq!(analyzed.annotations.len(), 2);
        assert!(analyzed.annotations.iter().all(|a| a.level == IntensityLevel::MildSupport));
        assert!(analyzed.annotations.iter().all(|a| a.justification.starts_with(MOCK_JUSTIFICATION_PREFIX)));
        assert!(analyzed.is_consistent());
        assert!(!analyzed.no_values);
    }

    #[test]
    fn empty_detection_gives_no_values_flag() {
        let analyzed = analyze_intensity(
            &Gateway::mock(),
            &TextInput::new("t1", "Set the torque to 5 Nm."),
            &label(&[]),
            &schwartz_spec(),
            &default_template(),
            &LlmRole::mock(RoleId::Critic),
            UnknownNamePolicy::Strict,
        )
        .unwrap();
        assert!(analyzed.annotations.is_empty());
        assert!(analyzed.no_values);
        assert!(analyzed.is_consistent());
    }

    #[test]
    fn malformed_twice_is_an_error() {
        let mock = MockBackend::new().with_script(RoleId::Critic, MockScript::always("[{\"value\": oops"));
        let err = analyze_intensity(
            &Gateway::new(Arc::new(mock)),
            &TextInput::new("t1", "text"),
            &label(&["Face"]),
            &schwartz_spec(),
            &default_template(),
            &LlmRole::mock(RoleId::Critic),
            UnknownNamePolicy::Strict,
        )
        .unwrap_err();
        assert_eq!(err.code(), "no-json-found");
    }

    #[test]
    fn critic_filter_drops_no_values_ratings() {
        let analyzed = AnalyzedText {
            text_id: "t1".into(),
            text: "x".into(),
            detection: label(&["Face", "Tradition"]),
            annotations: vec![
                IntensityAnnotation {
                    text_id: "t1".into(),
                    value: "Face".into(),
                    level: IntensityLevel::NoValues,
                    justification: "j".into(),
                },
                IntensityAnnotation {
                    text_id: "t1".into(),
                    value: "Tradition".into(),
                    level: IntensityLevel::Reframing,
                    justification: "j".into(),
                },
            ],
            no_values: false,
        };
        assert_eq!(analyzed.critic_filtered_label().detected, set(&["Tradition"]));
    }
}
