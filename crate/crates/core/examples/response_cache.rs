//! The persistent response cache. A second gateway opened on the same file
//! answers from disk.
//!
//! ```bash
//! cargo run --example response_cache
//! ```

use std::sync::Arc;

use value_lens::llm::{request_hash, ResponseCache};
use value_lens::{BackendSelector, ChatRequest, Gateway, LlmRole, RoleId};

fn main() -> anyhow::Result<()> {
    let path = std::env::temp_dir().join("valuelens-cache-example.jsonl");
    let _ = std::fs::remove_file(&path);

    let role = LlmRole::new(RoleId::Critic, BackendSelector::CachedMock);
    let request = role.bind(
        ChatRequest::default()
            .system("Rate each detected value.")
            .user(r#"{"text_id": "t1", "text": "We honour our elders.", "detected_values": ["Tradition"]}"#),
    );
    println!("key {}", &request_hash(&request)[..16]);

    for round in 1..=2 {
        let gateway = Gateway::mock().with_cache(Arc::new(ResponseCache::open(&path)?));
        let exchange = gateway.complete(&role, &request)?;
        println!("round {round}: cache hit {}, {} chars", exchange.cache_hit, exchange.response_text.len());
    }
    println!("{} cached entries in {}", ResponseCache::open(&path)?.len(), path.display());
    Ok(())
}
