//! Prompt template files with `{{placeholder}}` slots.
//!
//! A template may be split into a system and a user message by lines reading
//! exactly `<<<system>>>` and `<<<user>>>`; without markers the whole text is
//! one user message. Rendering is single-pass, so bound values that happen to
//! contain `{{...}}` are inserted literally.

use std::collections::BTreeSet;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::llm::ChatRequest;

const SYSTEM_MARKER: &str = "<<<system>>>";
const USER_MARKER: &str = "<<<user>>>";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unbound-placeholder: {{{{{0}}}}}")]
    UnboundPlaceholder(String),
    #[error("duplicate-binding: {{{{{0}}}}} bound more than once")]
    DuplicateBinding(String),
    #[error("template-io: {0}")]
    Io(String),
}

impl TemplateError {
    pub fn code(&self) -> &'static str {
        match self {
            TemplateError::UnboundPlaceholder(_) => "unbound-placeholder",
            TemplateError::DuplicateBinding(_) => "duplicate-binding",
            TemplateError::Io(_) => "io-error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    id: String,
    text: String,
    required: BTreeSet<String>,
    system: Option<Vec<Segment>>,
    user: Vec<Segment>,
}

fn is_placeholder_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

fn parse_segments(text: &str) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) if is_placeholder_name(after[..end].trim()) => {
                literal.push_str(&rest[..start]);
                if !literal.is_empty() {
                    segments.push(Segment::Literal(std::mem::take(&mut literal)));
                }
                segments.push(Segment::Slot(after[..end].trim().to_string()));
                rest = &after[end + 2..];
            }
            _ => {
                literal.push_str(&rest[..start + 2]);
                rest = after;
            }
        }
    }
    literal.push_str(rest);
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    segments
}

fn split_sections(text: &str) -> (Option<String>, String) {
    let mut system: Option<String> = None;
    let mut user: Option<String> = None;
    let mut current: Option<&mut String> = None;
    let mut preamble = String::new();
    for line in text.split_inclusive('\n') {
        match line.trim_end_matches(['\n', '\r']) {
            SYSTEM_MARKER => current = Some(system.get_or_insert_with(String::new)),
            USER_MARKER => current = Some(user.get_or_insert_with(String::new)),
            _ => match current.as_deref_mut() {
                Some(buf) => buf.push_str(line),
                None => preamble.push_str(line),
            },
        }
    }
    match (system, user) {
        (None, None) => (None, preamble),
        (system, user) => (system, user.unwrap_or_default()),
    }
}

impl PromptTemplate {
    /// Fails with `unbound-placeholder` when a required slot is absent from
    /// the text, since its binding would have nowhere to go.
    pub fn new(id: impl Into<String>, text: impl Into<String>, required: &[&str]) -> Result<Self, TemplateError> {
        let text = text.into();
        let (system, user) = split_sections(&text);
        let template = Self {
            id: id.into(),
            required: required.iter().map(|s| s.to_string()).collect(),
            system: system.map(|s| parse_segments(&s)),
            user: parse_segments(&user),
            text,
        };
        let present = template.placeholders();
        if let Some(missing) = template.required.iter().find(|r| !present.contains(*r)) {
            return Err(TemplateError::UnboundPlaceholder(missing.clone()));
        }
        Ok(template)
    }

    pub fn load(path: impl AsRef<Path>, required: &[&str]) -> Result<Self, TemplateError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| TemplateError::Io(format!("{}: {e}", path.display())))?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::new(id, text, required)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// SHA-256 of the raw template text, for run fingerprints.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }

    pub fn placeholders(&self) -> BTreeSet<String> {
        self.system
            .iter()
            .flatten()
            .chain(self.user.iter())
            .filter_map(|s| match s {
                Segment::Slot(name) => Some(name.clone()),
                Segment::Literal(_) => None,
            })
            .collect()
    }

    /// Renders into a chat request. Every slot in the text and every required
    /// slot must be bound exactly once; bindings for absent slots are ignored.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<ChatRequest, TemplateError> {
        let mut seen = BTreeSet::new();
        for (name, _) in bindings {
            if !seen.insert(*name) {
                return Err(TemplateError::DuplicateBinding(name.to_string()));
            }
        }
        if let Some(missing) = self.required.iter().find(|r| !seen.contains(r.as_str())) {
            return Err(TemplateError::UnboundPlaceholder(missing.clone()));
        }
        let fill = |segments: &[Segment]| -> Result<String, TemplateError> {
            let mut out = String::new();
            for seg in segments {
                match seg {
                    Segment::Literal(s) => out.push_str(s),
                    Segment::Slot(name) => {
                        let value = bindings
                            .iter()
                            .find(|(n, _)| n == name)
                            .map(|(_, v)| *v)
                            .ok_or_else(|| TemplateError::UnboundPlaceholder(name.clone()))?;
                        out.push_str(value);
                    }
                }
            }
            Ok(out.trim().to_string())
        };
        let mut request = ChatRequest::default();
        if let Some(system) = &self.system {
            let system = fill(system)?;
            if !system.is_empty() {
                request = request.system(system);
            }
        }
        let user = fill(&self.user)?;
        if !user.is_empty() {
            request = request.user(user);
        }
        Ok(request)
    }
}

/// Built-in template texts, also shipped as files under `prompts/`.
pub mod builtin {
    pub const CONCEPTUALIZATION: &str = include_str!("../prompts/conceptualization.txt");
    pub const DETECTION: &str = include_str!("../prompts/detection.txt");
    pub const INTENSITY: &str = include_str!("../prompts/intensity.txt");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MessageRole;

    #[test]
    fn renders_sections_and_slots() {
        let t =
            PromptTemplate::new("t", "<<<system>>>\nRules: {{rules}}\n<<<user>>>\n{{ input_text }}\n", &["input_text"])
                .unwrap();
        let req = t.render(&[("rules", "be brief"), ("input_text", "hello {{rules}}")]).unwrap();
        assert_eq!(req.messages.len(), 2);
        assert_eq!(req.messages[0].role, MessageRole::System);
        assert_eq!(req.messages[0].content, "Rules: be brief");
        assert_eq!(req.messages[1].content, "hello {{rules}}");
    }

    #[test]
    fn no_markers_means_one_user_message() {
        let t = PromptTemplate::new("t", "Sources:\n{{sources}}", &["sources"]).unwrap();
        let req = t.render(&[("sources", "A")]).unwrap();
        assert_eq!(req.messages.len(), 1);
        assert_eq!(req.messages[0].role, MessageRole::User);
    }

    #[test]
    fn missing_required_slot_in_text() {
        let err = PromptTemplate::new("t", "No slots here", &["sources"]).unwrap_err();
        assert_eq!(err, TemplateError::UnboundPlaceholder("sources".into()));
    }

    #[test]
    fn unbound_and_duplicate_bindings() {
        let t = PromptTemplate::new("t", "{{a}} {{b}}", &["a"]).unwrap();
        assert_eq!(t.render(&[("a", "1")]).unwrap_err(), TemplateError::UnboundPlaceholder("b".into()));
        assert_eq!(
            t.render(&[("a", "1"), ("b", "2"), ("a", "3")]).unwrap_err(),
            TemplateError::DuplicateBinding("a".into())
        );
        assert_eq!(t.render(&[("a", "1"), ("b", "2"), ("c", "x")]).unwrap().messages[0].content, "1 2");
    }

    #[test]
    fn non_placeholder_braces_are_literal() {
        let t = PromptTemplate::new("t", "json like {{\"a\": 1}} and {{x}}", &[]).unwrap();
        assert_eq!(t.placeholders().into_iter().collect::<Vec<_>>(), ["x"]);
        assert_eq!(t.render(&[("x", "X")]).unwrap().messages[0].content, "json like {{\"a\": 1}} and X");
    }

    #[test]
    fn builtins_parse() {
        for text in [builtin::CONCEPTUALIZATION, builtin::DETECTION, builtin::INTENSITY] {
            assert!(!PromptTemplate::new("b", text, &[]).unwrap().placeholders().is_empty());
        }
    }
}
