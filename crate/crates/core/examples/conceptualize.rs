//! Build a value specification from source documents.
//!
//! The mock conceptualizer replays a recorded model answer, so this runs
//! offline. Set `VALUELENS_API_KEY` and pass `--live` to ask a real model.
//!
//! ```bash
//! cargo run --example conceptualize
//! cargo run --example conceptualize -- --live
//! ```

use std::path::Path;
use std::sync::Arc;

use value_lens::conceptualization::{conceptualize, default_template, SourceDocument};
use value_lens::llm::{LiveBackend, LiveConfig, MockBackend, MockScript, DEFAULT_BASE_URL};
use value_lens::value_spec::{serialize_spec, validate_spec};
use value_lens::{BackendSelector, Gateway, LlmRole, RoleId, SystemClock};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let sources = SourceDocument::load_dir(&fixtures.join("sources"))?;
    println!("{} source documents", sources.len());

    let live = std::env::args().any(|a| a == "--live");
    let recorded = std::fs::read_to_string(fixtures.join("conceptualizer_response.md"))?;
    let mut gateway =
        Gateway::new(Arc::new(MockBackend::new().with_script(RoleId::Conceptualizer, MockScript::always(recorded))));
    let role = if live {
        gateway = gateway.with_live(Arc::new(LiveBackend::new(LiveConfig::from_env(DEFAULT_BASE_URL))?));
        LlmRole::new(RoleId::Conceptualizer, BackendSelector::Live)
    } else {
        LlmRole::mock(RoleId::Conceptualizer)
    };

    let spec = conceptualize(&gateway, &sources, &default_template(), &role, "Schwartz refined theory", &SystemClock)?;
    for v in &spec.values {
        println!("{:<28} {:<20} {} tags", v.name, v.grouping, v.tags.len());
    }
    // Thin values are reported rather than patched.
    for violation in validate_spec(&spec) {
        println!("warning: {violation}");
    }
    let out = std::env::temp_dir().join("valuelens-spec.json");
    std::fs::write(&out, serialize_spec(&spec)?)?;
    println!("wrote {}", out.display());
    Ok(())
}
