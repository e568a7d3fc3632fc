//! Run the HTTP API on a local port with mock models, then act as a client:
//! revise the spec and analyse a text.
//!
//! ```bash
//! cargo run --example http_service
//! ```

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};
use value_lens::service::{serve, AnalysisSetup, AppState};
use value_lens::value_spec::parse_spec;
use value_lens::{detection, intensity, Gateway, LlmRole, RoleId, SystemClock, UnknownNamePolicy};

fn main() -> anyhow::Result<()> {
    let work = std::env::temp_dir().join("valuelens-service-example");
    std::fs::create_dir_all(&work)?;
    let spec_path = work.join("spec.json");
    std::fs::copy(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/schwartz_spec.json"), &spec_path)?;
    let spec = parse_spec(&std::fs::read_to_string(&spec_path)?)?;

    let setup = AnalysisSetup {
        gateway: Arc::new(Gateway::mock()),
        detection_template: detection::default_template(),
        intensity_template: intensity::default_template(),
        detector: LlmRole::mock(RoleId::Detector),
        critic: LlmRole::mock(RoleId::Critic),
        policy: UnknownNamePolicy::Strict,
        workers: 2,
    };
    let state = Arc::new(AppState::new(spec, Some(spec_path), setup, work.join("results"), Arc::new(SystemClock))?);

    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    runtime.spawn(serve(listener, state));
    println!("serving on {base}");

    let client = reqwest::blocking::Client::new();
    let current: Value = client.get(format!("{base}/api/spec")).send()?.json()?;
    let version = current["version"].as_u64().unwrap_or_default();

    let revision =
        json!({"target": "Universalism: nature", "operation": "add_tag", "payload": "rewilding", "author": "me"});
    let resp = client
        .put(format!("{base}/api/spec/revisions"))
        .header("If-Match", format!("\"{version}\""))
        .json(&revision)
        .send()?;
    println!("revision: {} -> version {}", resp.status(), resp.json::<Value>()?["version"]);
    let stale = client
        .put(format!("{base}/api/spec/revisions"))
        .header("If-Match", format!("\"{version}\""))
        .json(&revision)
        .send()?;
    println!("same revision on the old version: {}", stale.status());

    let job: Value = client
        .post(format!("{base}/api/analyze"))
        .json(&json!({"text": "Rewilding the valley honours our ancestors."}))
        .send()?
        .json()?;
    let id = job["job_id"].as_str().unwrap_or_default().to_string();
    loop {
        let status: Value = client.get(format!("{base}/api/jobs/{id}")).send()?.json()?;
        if status["state"] == "done" || status["state"] == "failed" {
            println!("job history {}", status["history"]);
            break;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    let result: Value = client.get(format!("{base}/api/results/{id}")).send()?.json()?;
    for a in result["annotations"].as_array().into_iter().flatten() {
        println!("{}: {}", a["value"], a["level"]);
    }
    drop(client);
    runtime.shutdown_timeout(Duration::from_secs(1));
    Ok(())
}
