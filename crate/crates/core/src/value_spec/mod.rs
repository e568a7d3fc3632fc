//! The enriched value specification: the stage-one artifact that describes a
//! value theory value by value, and the expert revisions that refine it.
//!
//! Specs are immutable values. Every change goes through [`apply_revision`],
//! which returns a new spec with a bumped version and leaves its input alone.

mod codec;
mod names;
mod revision;

use std::collections::HashMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use codec::decode_generated;
pub use codec::{parse_spec, serialize_spec};
pub use names::{canonicalize_value_name, normalize_value_name, Taxonomy, SCHWARTZ_VALUES};
pub use revision::{apply_revision, ExpertRevision, RevisionOp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("unknown-value: {0:?} is not in the taxonomy")]
    UnknownValue(String),
    #[error("taxonomy is empty or contains an empty name")]
    EmptyTaxonomy,
    #[error("taxonomy names {first:?} and {second:?} normalize to the same key")]
    AmbiguousTaxonomy { first: String, second: String },
    #[error("duplicate-element: {value:?} already has {text:?}")]
    DuplicateElement { value: String, text: String },
    #[error("missing-element: {value:?} has no {text:?}")]
    MissingElement { value: String, text: String },
    #[error("invalid-payload: {0}")]
    InvalidPayload(String),
    #[error("invalid-spec: {}", join_violations(.0))]
    InvalidSpec(Vec<Violation>),
    #[error("malformed-json: {0}")]
    MalformedJson(String),
    #[error("schema-violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
}

impl SpecError {
    pub fn code(&self) -> &'static str {
        match self {
            SpecError::UnknownValue(_) => "unknown-value",
            SpecError::EmptyTaxonomy | SpecError::AmbiguousTaxonomy { .. } => "invalid-taxonomy",
            SpecError::DuplicateElement { .. } => "duplicate-element",
            SpecError::MissingElement { .. } => "missing-element",
            SpecError::InvalidPayload(_) => "invalid-payload",
            SpecError::InvalidSpec(_) => "invalid-spec",
            SpecError::MalformedJson(_) => "malformed-json",
            SpecError::SchemaViolation { .. } => "schema-violation",
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Who produced a tag or example.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Generated,
    Expert,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Generated => "generated",
            Provenance::Expert => "expert",
        }
    }
}

/// A tag or example string together with its provenance marker.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecItem {
    pub text: String,
    pub provenance: Provenance,
}

impl SpecItem {
    pub fn generated(text: impl Into<String>) -> Self {
        Self { text: text.into(), provenance: Provenance::Generated }
    }

    pub fn expert(text: impl Into<String>) -> Self {
        Self { text: text.into(), provenance: Provenance::Expert }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueDefinition {
    pub name: String,
    pub description: String,
    pub grouping: String,
    pub tags: Vec<SpecItem>,
    pub examples: Vec<SpecItem>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueTheorySpec {
    pub theory_name: String,
    pub source_documents: Vec<String>,
    pub version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "timestamp_opt")]
    pub created: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "timestamp_opt")]
    pub modified: Option<DateTime<Utc>>,
    pub values: Vec<ValueDefinition>,
}

impl ValueTheorySpec {
    pub fn value(&self, name: &str) -> Option<&ValueDefinition> {
        let key = normalize_value_name(name);
        self.values.iter().find(|v| normalize_value_name(&v.name) == key)
    }

    /// The spec's value names as a lookup taxonomy.
    pub fn taxonomy(&self) -> Result<Taxonomy, SpecError> {
        Taxonomy::new(self.values.iter().map(|v| v.name.clone()))
    }
}

/// One broken invariant found by [`validate_spec`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptyTheoryName,
    ZeroVersion,
    NoValues,
    EmptyName { index: usize },
    DuplicateName { name: String, first: String },
    EmptyDescription { value: String },
    NoTags { value: String },
    NoExamples { value: String },
    EmptyTag { value: String, index: usize },
    UntrimmedTag { value: String, index: usize },
    DuplicateTag { value: String, text: String },
    EmptyExample { value: String, index: usize },
    DuplicateExample { value: String, text: String },
}

impl Violation {
    pub fn code(&self) -> &'static str {
        match self {
            Violation::EmptyTheoryName => "empty-theory-name",
            Violation::ZeroVersion => "zero-version",
            Violation::NoValues => "no-values",
            Violation::EmptyName { .. } => "empty-name",
            Violation::DuplicateName { .. } => "duplicate-name",
            Violation::EmptyDescription { .. } => "empty-description",
            Violation::NoTags { .. } => "no-tags",
            Violation::NoExamples { .. } => "no-examples",
            Violation::EmptyTag { .. } => "empty-tag",
            Violation::UntrimmedTag { .. } => "untrimmed-tag",
            Violation::DuplicateTag { .. } => "duplicate-tag",
            Violation::EmptyExample { .. } => "empty-example",
            Violation::DuplicateExample { .. } => "duplicate-example",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let code = self.code();
        match self {
            Violation::EmptyTheoryName | Violation::ZeroVersion | Violation::NoValues => {
                write!(f, "{code}")
            }
            Violation::EmptyName { index } => write!(f, "{code}: values[{index}]"),
            Violation::DuplicateName { name, first } => {
                write!(f, "{code}: {name:?} collides with {first:?}")
            }
            Violation::EmptyDescription { value } | Violation::NoTags { value } | Violation::NoExamples { value } => {
                write!(f, "{code}: {value:?}")
            }
            Violation::EmptyTag { value, index }
            | Violation::UntrimmedTag { value, index }
            | Violation::EmptyExample { value, index } => {
                write!(f, "{code}: {value:?} item {index}")
            }
            Violation::DuplicateTag { value, text } | Violation::DuplicateExample { value, text } => {
                write!(f, "{code}: {value:?} repeats {text:?}")
            }
        }
    }
}

/// Collects every invariant violation in `spec`. An empty list means valid.
///
/// Thin values (no description, tags or examples) are reported rather than
/// patched so that weak generator output reaches the reviewing expert.
pub fn validate_spec(spec: &ValueTheorySpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if spec.theory_name.trim().is_empty() {
        out.push(Violation::EmptyTheoryName);
    }
    if spec.version == 0 {
        out.push(Violation::ZeroVersion);
    }
    if spec.values.is_empty() {
        out.push(Violation::NoValues);
    }
    let mut seen: HashMap<String, &str> = HashMap::new();
    for (i, value) in spec.values.iter().enumerate() {
        let key = normalize_value_name(&value.name);
        if key.is_empty() {
            out.push(Violation::EmptyName { index: i });
            continue;
        }
        if let Some(first) = seen.get(&key) {
            out.push(Violation::DuplicateName { name: value.name.clone(), first: first.to_string() });
        } else {
            seen.insert(key, &value.name);
        }
        let name = || value.name.clone();
        if value.description.trim().is_empty() {
            out.push(Violation::EmptyDescription { value: name() });
        }
        if value.tags.is_empty() {
            out.push(Violation::NoTags { value: name() });
        }
        if value.examples.is_empty() {
            out.push(Violation::NoExamples { value: name() });
        }
        let mut tags_seen = Vec::with_capacity(value.tags.len());
        for (j, tag) in value.tags.iter().enumerate() {
            if tag.text.trim().is_empty() {
                out.push(Violation::EmptyTag { value: name(), index: j });
            } else if tag.text.trim() != tag.text {
                out.push(Violation::UntrimmedTag { value: name(), index: j });
            }
            let t = tag.text.trim();
            if !t.is_empty() && tags_seen.contains(&t) {
                out.push(Violation::DuplicateTag { value: name(), text: t.to_string() });
            }
            tags_seen.push(t);
        }
        let mut examples_seen = Vec::with_capacity(value.examples.len());
        for (j, ex) in value.examples.iter().enumerate() {
            let t = ex.text.trim();
            if t.is_empty() {
                out.push(Violation::EmptyExample { value: name(), index: j });
            } else if examples_seen.contains(&t) {
                out.push(Violation::DuplicateExample { value: name(), text: t.to_string() });
            }
            examples_seen.push(t);
        }
    }
    out
}

/// Returns `Ok(())` or the full violation list as an error.
pub fn ensure_valid(spec: &ValueTheorySpec) -> Result<(), SpecError> {
    let violations = validate_spec(spec);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(SpecError::InvalidSpec(violations))
    }
}

/// Compact JSON view of a spec for embedding in prompts: tags and examples
/// as plain strings, no provenance or versioning.
pub fn render_for_prompt(spec: &ValueTheorySpec) -> String {
    let values: Vec<serde_json::Value> = spec
        .values
        .iter()
        .map(|v| {
            serde_json::json!({
                "name": v.name,
                "description": v.description,
                "grouping": v.grouping,
                "tags": v.tags.iter().map(|t| t.text.as_str()).collect::<Vec<_>>(),
                "examples": v.examples.iter().map(|e| e.text.as_str()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let doc = serde_json::json!({ "theory_name": spec.theory_name, "values": values });
    serde_json::to_string_pretty(&doc).expect("json values serialize")
}

pub(crate) mod timestamp_opt {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(t) => s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Secs, true)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        raw.map(|r| DateTime::parse_from_rfc3339(&r).map(|t| t.with_timezone(&Utc)).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn value(name: &str) -> ValueDefinition {
        ValueDefinition {
            name: name.to_string(),
            description: format!("Definition of {name}."),
            grouping: "Group".to_string(),
            tags: vec![SpecItem::generated(format!("{} tag", name.to_lowercase()))],
            examples: vec![SpecItem::generated(format!("An example about {name}."))],
        }
    }

    pub fn schwartz_spec() -> ValueTheorySpec {
        ValueTheorySpec {
            theory_name: "Schwartz".to_string(),
            source_documents: vec!["overview".to_string()],
            version: 1,
            created: None,
            modified: None,
            values: SCHWARTZ_VALUES.iter().map(|n| value(n)).collect(),
        }
    }
}
