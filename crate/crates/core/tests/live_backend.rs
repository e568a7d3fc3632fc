mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use common::*;
use value_lens::detection::{self, detect_values};
use value_lens::llm::{LiveBackend, LiveConfig, ResponseCache, RetryPolicy};
use value_lens::{BackendSelector, Gateway, LlmRole, RoleId, TextInput, UnknownNamePolicy};

struct Seen {
    auth: Option<String>,
    path: String,
    body: serde_json::Value,
}

/// Serves one canned `(status, body)` per connection, recording requests.
fn fake_server(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let (mut length, mut auth) = (0, None);
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => auth = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                auth,
                path: request_line.split_whitespace().nth(1).unwrap().to_string(),
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (base, seen)
}

fn completion(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

fn gateway(base: &str) -> Gateway {
    let live = LiveBackend::new(LiveConfig {
        base_url: base.into(),
        api_key: Some("test-key".into()),
        timeout: Duration::from_secs(5),
    })
    .unwrap();
    Gateway::mock().with_live(Arc::new(live)).with_retry(RetryPolicy {
        initial_backoff: Duration::from_millis(5),
        max_backoff: Duration::from_millis(20),
        ..RetryPolicy::default()
    })
}

#[test]
fn detection_over_live_endpoint_with_one_retry() {
    let (base, seen) = fake_server(vec![
        (503, "{\"error\":\"overloaded\"}".into()),
        (200, completion("Detected values:\n```json\n[\"tradition\", \"Universalism:nature\"]\n```")),
    ]);
    let role = LlmRole::new(RoleId::Detector, BackendSelector::Live);
    let label = detect_values(
        &gateway(&base),
        &TextInput::new("t1", "Old customs and clean rivers."),
        &fixture_spec(),
        &detection::default_template(),
        &role,
        UnknownNamePolicy::Strict,
    )
    .unwrap();
    assert_eq!(label.detected.into_iter().collect::<Vec<_>>(), ["Tradition", "Universalism: nature"]);

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[1].path, "/v1/chat/completions");
    assert_eq!(seen[1].auth.as_deref(), Some("Bearer test-key"));
    assert_eq!(seen[1].body["model"], role.model_id);
    assert_eq!(seen[1].body["temperature"], 0.0);
    let messages = seen[1].body["messages"].as_array().unwrap();
    assert_eq!(messages.last().unwrap()["content"], "Old customs and clean rivers.");
}

#[test]
fn auth_failure_is_not_retried() {
    let (base, seen) = fake_server(vec![(401, "{\"error\":\"bad key\"}".into()), (200, completion("[]"))]);
    let role = LlmRole::new(RoleId::Detector, BackendSelector::Live);
    let err = detect_values(
        &gateway(&base),
        &TextInput::new("t1", "x"),
        &fixture_spec(),
        &detection::default_template(),
        &role,
        UnknownNamePolicy::Strict,
    )
    .unwrap_err();
    assert_eq!(err.code(), "auth-error");
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn cached_live_answers_second_call_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("cache.jsonl");
    let (base, seen) = fake_server(vec![(200, completion("[\"Face\"]"))]);
    let role = LlmRole::new(RoleId::Detector, BackendSelector::CachedLive);
    let input = TextInput::new("t1", "Keep up appearances.");
    let run = || {
        let gw = gateway(&base).with_cache(Arc::new(ResponseCache::open(&cache_path).unwrap()));
        detect_values(&gw, &input, &fixture_spec(), &detection::default_template(), &role, UnknownNamePolicy::Strict)
            .unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    assert_eq!(seen.lock().unwrap().len(), 1);
}
