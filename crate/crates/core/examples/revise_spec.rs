//! Expert revisions: each one is checked, bumps the version and marks the
//! new element as expert-provided.
//!
//! ```bash
//! cargo run --example revise_spec
//! ```

use chrono::Utc;
use value_lens::value_spec::{apply_revision, parse_spec, ExpertRevision, RevisionOp};

fn main() -> anyhow::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/schwartz_spec.json");
    let spec = parse_spec(&std::fs::read_to_string(path)?)?;
    println!("loaded {} at version {}", spec.theory_name, spec.version);

    let revise = |target: &str, operation, payload: &str| ExpertRevision {
        target: target.into(),
        operation,
        payload: payload.into(),
        author: "reviewer-1".into(),
        timestamp: Utc::now(),
    };

    // Names are matched case- and whitespace-insensitively.
    let spec = apply_revision(&spec, &revise("universalism :  NATURE", RevisionOp::AddTag, "recycling"))?;
    let nature = spec.value("Universalism: nature").expect("in the taxonomy");
    println!("v{}: {:?}", spec.version, nature.tags.iter().map(|t| (&t.text, t.provenance)).collect::<Vec<_>>());

    let spec = apply_revision(
        &spec,
        &revise("Face", RevisionOp::EditDescription, "Guarding one's standing in the eyes of others."),
    )?;
    println!("v{}: Face = {}", spec.version, spec.value("Face").unwrap().description);

    // Rejected revisions leave the spec untouched.
    for (op, payload) in [(RevisionOp::RemoveTag, "no such tag"), (RevisionOp::AddTag, "recycling")] {
        match apply_revision(&spec, &revise("Universalism: nature", op, payload)) {
            Ok(_) => println!("unexpectedly accepted"),
            Err(e) => println!("rejected {op:?} {payload:?}: {}", e.code()),
        }
    }
    match apply_revision(&spec, &revise("Patriotism", RevisionOp::AddTag, "flag")) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected unknown target: {e}"),
    }
    Ok(())
}
