//! Detection and rating against a live chat-completions endpoint.
//!
//! Needs `VALUELENS_API_KEY`. `VALUELENS_BASE_URL` selects another
//! OpenAI-compatible server, `VALUELENS_MODEL` another model. Answers are
//! cached next to the temp dir so reruns cost nothing.
//!
//! ```bash
//! VALUELENS_API_KEY=... cargo run --example live_endpoint -- "Text to analyse"
//! ```

use std::sync::Arc;

use value_lens::llm::{LiveBackend, LiveConfig, ResponseCache, API_KEY_ENV, DEFAULT_BASE_URL};
use value_lens::value_spec::parse_spec;
use value_lens::{detection, intensity, BackendSelector, Gateway, LlmRole, RoleId, TextInput, UnknownNamePolicy};

fn main() -> anyhow::Result<()> {
    if std::env::var(API_KEY_ENV).is_err() {
        eprintln!("set {API_KEY_ENV} to run this example");
        return Ok(());
    }
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "Citizens must obey the constitution even when they dislike a law.".into());
    let spec = parse_spec(&std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/schwartz_spec.json"
    ))?)?;

    let base = std::env::var("VALUELENS_BASE_URL").unwrap_or_else(|_| DEFAULT_BASE_URL.into());
    let cache = ResponseCache::open(std::env::temp_dir().join("valuelens-live-cache.jsonl"))?;
    let gateway =
        Gateway::mock().with_live(Arc::new(LiveBackend::new(LiveConfig::from_env(base))?)).with_cache(Arc::new(cache));
    let role = |id| {
        let mut r = LlmRole::new(id, BackendSelector::CachedLive);
        if let Ok(m) = std::env::var("VALUELENS_MODEL") {
            r.model_id = m;
        }
        r
    };

    let input = TextInput::new("cli", text);
    let policy = UnknownNamePolicy::Lenient;
    let label = detection::detect_values(
        &gateway,
        &input,
        &spec,
        &detection::default_template(),
        &role(RoleId::Detector),
        policy,
    )?;
    println!("detected: {:?}", label.detected);
    let analyzed = intensity::analyze_intensity(
        &gateway,
        &input,
        &label,
        &spec,
        &intensity::default_template(),
        &role(RoleId::Critic),
        policy,
    )?;
    for a in &analyzed.annotations {
        println!("{} -> {}: {}", a.value, a.level, a.justification);
    }
    Ok(())
}
