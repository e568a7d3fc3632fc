//! Process exit codes of the `valuelens` binary, one per error code.
//!
//! The table is append-only: codes never change meaning between releases.
//! Clap reports usage errors with exit code 2 before any of these apply.

/// `(error code, exit code, meaning)`
pub const EXIT_CODES: &[(&str, i32, &str)] = &[
    ("configuration-error", 10, "config file or flags are invalid"),
    ("missing-file", 11, "a referenced input file does not exist"),
    ("io-error", 12, "reading or writing a file failed"),
    ("empty-sources", 13, "no source documents were found"),
    ("empty-document", 14, "a source document has no text"),
    ("unbound-placeholder", 15, "a template lacks a required placeholder"),
    ("duplicate-binding", 16, "a placeholder was bound twice"),
    ("no-json-found", 17, "a model answer had no usable JSON"),
    ("schema-violation", 18, "JSON does not match the expected shape"),
    ("duplicate-value-names", 19, "a generated spec names a value twice"),
    ("invalid-spec", 20, "a spec fails validation"),
    ("malformed-json", 21, "a file is not valid JSON"),
    ("auth-error", 22, "the endpoint rejected the credential, or none is set"),
    ("rate-limited", 23, "the endpoint kept rate limiting after retries"),
    ("network-error", 24, "the endpoint was unreachable after retries"),
    ("http-error", 25, "the endpoint answered with an error status"),
    ("empty-response", 26, "the model answered with no text"),
    ("backend-unavailable", 27, "the selected backend is not configured"),
    ("cache-error", 28, "the response cache could not be used"),
    ("invalid-request", 29, "a chat request was malformed"),
    ("unknown-value", 30, "a value name is not in the taxonomy"),
    ("unknown-level", 31, "an intensity level is not one of the seven"),
    ("malformed-annotation", 32, "a rating lacks a field"),
    ("empty-justification", 33, "a rating has no justification"),
    ("value-set-mismatch", 34, "ratings do not cover exactly the detected values"),
    ("id-mismatch", 35, "predictions and texts or gold do not share ids"),
    ("duplicate-text-id", 36, "a text id occurs twice"),
    ("malformed-record", 37, "a JSON-lines record does not parse"),
    ("header-mismatch", 38, "a TSV file lacks a required column"),
    ("unknown-value-column", 39, "a label column names no taxonomy value"),
    ("join-error", 40, "sentences and labels rows do not pair up"),
    ("invalid-cell", 41, "a label cell is not a number"),
    ("empty-text", 42, "a text to analyse is empty"),
    ("checkpoint-mismatch", 43, "the checkpoint belongs to another configuration"),
    ("invalid-taxonomy", 44, "value names are empty or collide"),
    ("duplicate-element", 45, "a revision adds an element that exists"),
    ("missing-element", 46, "a revision removes an element that does not exist"),
    ("invalid-payload", 47, "a revision payload is empty"),
    ("partial-failure", 48, "a batch finished but some texts failed"),
];

/// Exit code for anything not in the table.
pub const OTHER_ERROR: i32 = 1;

pub fn exit_code(error_code: &str) -> i32 {
    EXIT_CODES.iter().find(|(c, _, _)| *c == error_code).map_or(OTHER_ERROR, |(_, n, _)| *n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn codes_are_distinct() {
        let names: HashSet<_> = EXIT_CODES.iter().map(|e| e.0).collect();
        let numbers: HashSet<_> = EXIT_CODES.iter().map(|e| e.1).collect();
        assert_eq!(names.len(), EXIT_CODES.len());
        assert_eq!(numbers.len(), EXIT_CODES.len());
        assert!(numbers.iter().all(|n| *n > 2 && *n < 126));
        assert_eq!(exit_code("no-such-code"), OTHER_ERROR);
    }
}
