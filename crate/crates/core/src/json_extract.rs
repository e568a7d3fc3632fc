//! Locating JSON inside free-form model output.
//!
//! Models wrap their answers in prose and markdown fences. Candidates are
//! taken from fenced blocks first, then from the whole text; within each
//! source the first balanced top-level object (or array) that deserializes
//! into the requested type wins. A trailing-comma cleanup is tried before a
//! candidate is discarded.

use serde::de::DeserializeOwned;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bracket {
    Object,
    Array,
}

impl Bracket {
    fn delimiters(self) -> (u8, u8) {
        match self {
            Bracket::Object => (b'{', b'}'),
            Bracket::Array => (b'[', b']'),
        }
    }
}

/// Contents of every ``` fenced block, in order of appearance.
pub fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        // Skip the info string (`json`, `JSON`, ...).
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        match body.find("```") {
            Some(end) => {
                blocks.push(&body[..end]);
                rest = &body[end + 3..];
            }
            None => {
                blocks.push(body);
                break;
            }
        }
    }
    blocks
}

/// Top-level balanced spans opened by `bracket`, string-literal aware.
pub fn balanced_spans(text: &str, bracket: Bracket) -> Vec<&str> {
    let (open, close) = bracket.delimiters();
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != open {
            i += 1;
            continue;
        }
        match matching_close(bytes, i, open, close) {
            Some(end) => {
                spans.push(&text[i..=end]);
                i = end + 1;
            }
            None => i += 1,
        }
    }
    spans
}

fn matching_close(bytes: &[u8], start: usize, open: u8, close: u8) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            match (escaped, b) {
                (true, _) => escaped = false,
                (false, b'\\') => escaped = true,
                (false, b'"') => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            _ if b == open => depth += 1,
            _ if b == close => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + offset);
                }
            }
            _ => {}
        }
    }
    None
}

/// Drops commas that directly precede a closing bracket, outside strings.
pub fn strip_trailing_commas(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_string = false,
                _ => {}
            }
            out.push(c);
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

fn try_parse<T: DeserializeOwned>(candidate: &str) -> Option<T> {
    serde_json::from_str(candidate).ok().or_else(|| serde_json::from_str(&strip_trailing_commas(candidate)).ok())
}

/// First candidate of the given bracket kind that deserializes into `T`.
pub fn extract_json<T: DeserializeOwned>(text: &str, bracket: Bracket) -> Option<T> {
    let fenced = fenced_blocks(text);
    fenced
        .iter()
        .copied()
        .chain(std::iter::once(text))
        .flat_map(|source| balanced_spans(source, bracket))
        .find_map(try_parse::<T>)
}

/// First balanced object that is valid JSON, as an untyped value.
pub fn extract_object(text: &str) -> Option<Value> {
    extract_json::<Value>(text, Bracket::Object).filter(Value::is_object)
}
