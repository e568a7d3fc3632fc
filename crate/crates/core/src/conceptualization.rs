//! Stage one: turn reference documents about a value theory into a
//! [`ValueTheorySpec`] awaiting expert review.

use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::clock::Clock;
use crate::json_extract::{extract_json, Bracket};
use crate::llm::{complete_with_repair, ChatRequest, Gateway, GatewayError, LlmRole, RoleId};
use crate::template::{builtin, PromptTemplate, TemplateError};
use crate::value_spec::{decode_generated, validate_spec, SpecError, ValueTheorySpec, Violation};

pub const PLACEHOLDERS: &[&str] = &["sources"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConceptualizationError {
    #[error("empty-sources: at least one source document is required")]
    EmptySources,
    #[error("empty-document: {0:?} has no text")]
    EmptyDocument(String),
    #[error("io-error: {0}")]
    Io(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("no-json-found: the answer contains no JSON object")]
    NoJsonFound,
    #[error("schema-violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("duplicate-value-names: {}", .0.join(", "))]
    DuplicateValueNames(Vec<String>),
    #[error("invalid-spec: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidSpec(Vec<Violation>),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl ConceptualizationError {
    pub fn code(&self) -> &'static str {
        match self {
            ConceptualizationError::EmptySources => "empty-sources",
            ConceptualizationError::EmptyDocument(_) => "empty-document",
            ConceptualizationError::Io(_) => "io-error",
            ConceptualizationError::Template(e) => e.code(),
            ConceptualizationError::NoJsonFound => "no-json-found",
            ConceptualizationError::SchemaViolation { .. } => "schema-violation",
            ConceptualizationError::DuplicateValueNames(_) => "duplicate-value-names",
            ConceptualizationError::InvalidSpec(_) => "invalid-spec",
            ConceptualizationError::Gateway(e) => e.code(),
        }
    }
}

/// A plain-text reference document about the value theory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceDocument {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    pub citation: String,
}

impl SourceDocument {
    pub fn new(
        doc_id: impl Into<String>,
        title: impl Into<String>,
        body: impl Into<String>,
        citation: impl Into<String>,
    ) -> Result<Self, ConceptualizationError> {
        let doc = Self { doc_id: doc_id.into(), title: title.into(), body: body.into(), citation: citation.into() };
        if doc.body.trim().is_empty() {
            return Err(ConceptualizationError::EmptyDocument(doc.doc_id));
        }
        Ok(doc)
    }

    /// Reads a text file. The file stem is the id and the first non-empty
    /// line the title; a line starting with `Citation:` sets the citation.
    pub fn from_file(path: &Path) -> Result<Self, ConceptualizationError> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| ConceptualizationError::Io(format!("{}: {e}", path.display())))?;
        let doc_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let title = body.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or_default().to_string();
        let citation = body
            .lines()
            .find_map(|l| l.trim().strip_prefix("Citation:"))
            .map(|c| c.trim().to_string())
            .unwrap_or_default();
        Self::new(doc_id, title, body, citation)
    }

    /// Every `.txt` or `.md` file in `dir`, ordered by file name.
    pub fn load_dir(dir: &Path) -> Result<Vec<Self>, ConceptualizationError> {
        let io = |e: std::io::Error| ConceptualizationError::Io(format!("{}: {e}", dir.display()));
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(io)?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("txt" | "md")))
            .collect();
        paths.sort();
        paths.iter().map(|p| Self::from_file(p)).collect()
    }
}

pub fn default_template() -> PromptTemplate {
    PromptTemplate::new("conceptualization", builtin::CONCEPTUALIZATION, PLACEHOLDERS)
        .expect("built-in conceptualization template is valid")
}

fn render_sources(sources: &[SourceDocument]) -> String {
    sources
        .iter()
        .enumerate()
        .map(|(i, doc)| {
            let mut block = format!("=== Document {} (id: {}) ===\nTitle: {}\n", i + 1, doc.doc_id, doc.title);
            if !doc.citation.is_empty() {
                block.push_str(&format!("Citation: {}\n", doc.citation));
            }
            block.push('\n');
            block.push_str(doc.body.trim());
            block.push('\n');
            block
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_conceptualization_prompt(
    template: &PromptTemplate,
    sources: &[SourceDocument],
) -> Result<ChatRequest, ConceptualizationError> {
    if sources.is_empty() {
        return Err(ConceptualizationError::EmptySources);
    }
    if let Some(doc) = sources.iter().find(|d| d.body.trim().is_empty()) {
        return Err(ConceptualizationError::EmptyDocument(doc.doc_id.clone()));
    }
    Ok(template.render(&[("sources", &render_sources(sources))])?)
}

/// Parses generator output into a version-1 spec with every tag and example
/// marked as generated. The result always passes validation.
pub fn extract_value_spec(response_text: &str, theory_name: &str) -> Result<ValueTheorySpec, ConceptualizationError> {
    let doc = extract_json::<Value>(response_text, Bracket::Object)
        .filter(|v| v.get("values").is_some())
        .or_else(|| extract_json::<Value>(response_text, Bracket::Object))
        .or_else(|| extract_json::<Value>(response_text, Bracket::Array))
        .ok_or(ConceptualizationError::NoJsonFound)?;
    let spec = decode_generated(&doc, theory_name).map_err(|e| match e {
        SpecError::SchemaViolation { path, message } => ConceptualizationError::SchemaViolation { path, message },
        other => ConceptualizationError::SchemaViolation { path: "/".into(), message: other.to_string() },
    })?;

    let violations = validate_spec(&spec);
    let duplicates: Vec<String> = violations
        .iter()
        .filter_map(|v| match v {
            Violation::DuplicateName { name, .. } => Some(name.clone()),
            _ => None,
        })
        .collect();
    if !duplicates.is_empty() {
        return Err(ConceptualizationError::DuplicateValueNames(duplicates));
    }
    if !violations.is_empty() {
        return Err(ConceptualizationError::InvalidSpec(violations));
    }
    Ok(spec)
}

/// Prompt, complete, extract; one repair re-ask on unusable output.
pub fn conceptualize(
    gateway: &Gateway,
    sources: &[SourceDocument],
    template: &PromptTemplate,
    role: &LlmRole,
    theory_name: &str,
    clock: &dyn Clock,
) -> Result<ValueTheorySpec, ConceptualizationError> {
    role.expect(RoleId::Conceptualizer)?;
    let request = role.bind(build_conceptualization_prompt(template, sources)?);
    let outcome = complete_with_repair(gateway, role, &request, |text| extract_value_spec(text, theory_name))?;
    let mut spec = outcome.value;
    spec.source_documents = sources.iter().map(|d| d.doc_id.clone()).collect();
    let now = clock.now();
    spec.created = Some(now);
    spec.modified = Some(now);
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sources() -> Vec<SourceDocument> {
        vec![
            SourceDocument::new("overview", "An Overview of Basic Values", "Ten values are described.", "").unwrap(),
            SourceDocument::new("refined", "Refining the Theory", "Nineteen values are described.", "J. Doe 2012")
                .unwrap(),
        ]
    }

    #[test]
    fn prompt_contains_every_source() {
        let req = build_conceptualization_prompt(&default_template(), &sources()).unwrap();
        let all: String = req.messages.iter().map(|m| m.content.as_str()).collect();
        for doc in sources() {
            assert!(all.contains(&doc.title));
            assert!(all.contains(&doc.body));
        }
        assert!(all.contains("\"tags\""));
        assert!(all.contains("\"grouping\""));
    }

    #[test]
    fn zero_sources() {
        assert_eq!(
            build_conceptualization_prompt(&default_template(), &[]).unwrap_err(),
            ConceptualizationError::EmptySources
        );
        assert!(SourceDocument::new("x", "t", "  ", "").is_err());
    }

    #[test]
    fn template_without_sources_slot() {
        let err = PromptTemplate::new("bad", "Describe the values.", PLACEHOLDERS).unwrap_err();
        assert_eq!(err.code(), "unbound-placeholder");
    }

    #[test]
    fn extraction_errors() {
        assert_eq!(extract_value_spec("No JSON, sorry.", "S").unwrap_err(), ConceptualizationError::NoJsonFound);
        let missing_tags = r#"{"values": [{"name": "Face", "description": "d", "grouping": "g", "examples": ["e"]}]}"#;
        match extract_value_spec(missing_tags, "S").unwrap_err() {
            ConceptualizationError::SchemaViolation { path, .. } => assert_eq!(path, "/values/0/tags"),
            other => panic!("{other:?}"),
        }
        let dup = r#"{"values": [
            {"name": "Face", "description": "d", "grouping": "g", "tags": ["t"], "examples": ["e"]},
            {"name": "face ", "description": "d", "grouping": "g", "tags": ["t"], "examples": ["e"]}]}"#;
        assert_eq!(extract_value_spec(dup, "S").unwrap_err().code(), "duplicate-value-names");
        let thin =
            r#"{"values": [{"name": "Face", "description": "d", "grouping": "g", "tags": [], "examples": ["e"]}]}"#;
        assert_eq!(extract_value_spec(thin, "S").unwrap_err().code(), "invalid-spec");
    }

    #[test]
    fn load_dir_reads_text_files_in_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.txt"), "Second\nCitation: Someone 2001\nbody").unwrap();
        std::fs::write(dir.path().join("a.md"), "\nFirst title\nbody").unwrap();
        std::fs::write(dir.path().join("skip.pdf"), "binary").unwrap();
        let docs = SourceDocument::load_dir(dir.path()).unwrap();
        assert_eq!(docs.iter().map(|d| d.doc_id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(docs[0].title, "First title");
        assert_eq!(docs[1].citation, "Someone 2001");
    }
}
