//! Canonical JSON form of a [`ValueTheorySpec`].
//!
//! Serialization is serde-derived with a fixed field order and two-space
//! indentation, terminated by a newline. Parsing walks a `serde_json::Value`
//! by hand so schema errors carry a JSON-pointer path.

use chrono::{DateTime, Utc};
use serde_json::{Map, Value};

use super::{ensure_valid, Provenance, SpecError, SpecItem, ValueDefinition, ValueTheorySpec};

pub fn serialize_spec(spec: &ValueTheorySpec) -> Result<String, SpecError> {
    ensure_valid(spec)?;
    let mut text = serde_json::to_string_pretty(spec).map_err(|e| SpecError::MalformedJson(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn parse_spec(text: &str) -> Result<ValueTheorySpec, SpecError> {
    let value: Value = serde_json::from_str(text).map_err(|e| SpecError::MalformedJson(e.to_string()))?;
    decode(&value, Mode::Canonical)
}

/// Decodes generator output: tags and examples may be bare strings, every
/// provenance becomes `generated`, the version is reset to 1 and unknown keys
/// are ignored.
pub(crate) fn decode_generated(value: &Value, theory_name: &str) -> Result<ValueTheorySpec, SpecError> {
    let mut spec = decode(value, Mode::Generated)?;
    spec.theory_name = theory_name.to_string();
    Ok(spec)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Canonical,
    Generated,
}

const SPEC_KEYS: &[&str] = &["theory_name", "source_documents", "version", "created", "modified", "values"];
const VALUE_KEYS: &[&str] = &["name", "description", "grouping", "tags", "examples"];
const ITEM_KEYS: &[&str] = &["text", "provenance"];

fn schema(path: impl Into<String>, message: impl Into<String>) -> SpecError {
    SpecError::SchemaViolation { path: path.into(), message: message.into() }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, SpecError> {
    v.as_object().ok_or_else(|| schema(path_or_root(path), "expected an object"))
}

fn path_or_root(path: &str) -> String {
    if path.is_empty() {
        "/".to_string()
    } else {
        path.to_string()
    }
}

fn check_keys(map: &Map<String, Value>, allowed: &[&str], path: &str, mode: Mode) -> Result<(), SpecError> {
    if mode == Mode::Generated {
        return Ok(());
    }
    match map.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(schema(format!("{path}/{k}"), "unexpected field")),
        None => Ok(()),
    }
}

fn field<'a>(map: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, SpecError> {
    map.get(key).ok_or_else(|| schema(format!("{path}/{key}"), "missing field"))
}

fn string_field(map: &Map<String, Value>, key: &str, path: &str) -> Result<String, SpecError> {
    field(map, key, path)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| schema(format!("{path}/{key}"), "expected a string"))
}

fn array_field<'a>(map: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Vec<Value>, SpecError> {
    field(map, key, path)?.as_array().ok_or_else(|| schema(format!("{path}/{key}"), "expected an array"))
}

fn timestamp_field(map: &Map<String, Value>, key: &str, path: &str) -> Result<Option<DateTime<Utc>>, SpecError> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => DateTime::parse_from_rfc3339(s)
            .map(|t| Some(t.with_timezone(&Utc)))
            .map_err(|e| schema(format!("{path}/{key}"), format!("invalid RFC 3339 timestamp: {e}"))),
        Some(_) => Err(schema(format!("{path}/{key}"), "expected a string")),
    }
}

fn decode(value: &Value, mode: Mode) -> Result<ValueTheorySpec, SpecError> {
    // Generators sometimes answer with the bare list of values.
    if mode == Mode::Generated {
        if let Value::Array(values) = value {
            return Ok(ValueTheorySpec {
                theory_name: String::new(),
                source_documents: Vec::new(),
                version: 1,
                created: None,
                modified: None,
                values: decode_values(values, "/values", mode)?,
            });
        }
    }
    let root = as_object(value, "")?;
    check_keys(root, SPEC_KEYS, "", mode)?;

    let theory_name = match mode {
        Mode::Canonical => string_field(root, "theory_name", "")?,
        Mode::Generated => root.get("theory_name").and_then(Value::as_str).unwrap_or_default().to_string(),
    };
    let source_documents = match (mode, root.get("source_documents")) {
        (Mode::Generated, None) => Vec::new(),
        _ => array_field(root, "source_documents", "")?
            .iter()
            .enumerate()
            .map(|(i, d)| {
                d.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| schema(format!("/source_documents/{i}"), "expected a string"))
            })
            .collect::<Result<_, _>>()?,
    };
    let version = match mode {
        Mode::Canonical => {
            field(root, "version", "")?.as_u64().ok_or_else(|| schema("/version", "expected a non-negative integer"))?
        }
        Mode::Generated => 1,
    };
    let (created, modified) = match mode {
        Mode::Canonical => (timestamp_field(root, "created", "")?, timestamp_field(root, "modified", "")?),
        Mode::Generated => (None, None),
    };
    let values = decode_values(array_field(root, "values", "")?, "/values", mode)?;
    Ok(ValueTheorySpec { theory_name, source_documents, version, created, modified, values })
}

fn decode_values(values: &[Value], path: &str, mode: Mode) -> Result<Vec<ValueDefinition>, SpecError> {
    values.iter().enumerate().map(|(i, v)| decode_value(v, &format!("{path}/{i}"), mode)).collect()
}

fn decode_value(value: &Value, path: &str, mode: Mode) -> Result<ValueDefinition, SpecError> {
    let map = as_object(value, path)?;
    check_keys(map, VALUE_KEYS, path, mode)?;
    Ok(ValueDefinition {
        name: string_field(map, "name", path)?,
        description: string_field(map, "description", path)?,
        grouping: string_field(map, "grouping", path)?,
        tags: decode_items(array_field(map, "tags", path)?, &format!("{path}/tags"), mode)?,
        examples: decode_items(array_field(map, "examples", path)?, &format!("{path}/examples"), mode)?,
    })
}

fn decode_items(items: &[Value], path: &str, mode: Mode) -> Result<Vec<SpecItem>, SpecError> {
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let path = format!("{path}/{i}");
            match (mode, item) {
                (Mode::Generated, Value::String(s)) => Ok(SpecItem::generated(s.clone())),
                (Mode::Generated, Value::Object(map)) => Ok(SpecItem::generated(string_field(map, "text", &path)?)),
                (Mode::Generated, _) => Err(schema(path, "expected a string or an object")),
                (Mode::Canonical, _) => {
                    let map = as_object(item, &path)?;
                    check_keys(map, ITEM_KEYS, &path, mode)?;
                    let text = string_field(map, "text", &path)?;
                    let provenance = match string_field(map, "provenance", &path)?.as_str() {
                        "generated" => Provenance::Generated,
                        "expert" => Provenance::Expert,
                        other => {
                            return Err(schema(
                                format!("{path}/provenance"),
                                format!("expected \"generated\" or \"expert\", got {other:?}"),
                            ))
                        }
                    };
                    Ok(SpecItem { text, provenance })
                }
            }
        })
        .collect()
}
