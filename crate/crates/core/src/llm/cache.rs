//! Append-only response cache keyed by request hash.
//!
//! Each record is one JSON line `{hash, request, response_text, timestamp}`.
//! The first record for a hash wins; a torn final line from an interrupted
//! write is ignored on load.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{ChatRequest, GatewayError};

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    hash: String,
    request: ChatRequest,
    response_text: String,
    timestamp: String,
}

#[derive(Debug)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, String>>,
    writer: Mutex<Option<File>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self { path: None, entries: RwLock::default(), writer: Mutex::new(None) }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let io = |e: std::io::Error| GatewayError::Cache(format!("{}: {e}", path.display()));
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io)?);
            for line in reader.lines() {
                let line = line.map_err(io)?;
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(rec) => {
                        entries.entry(rec.hash).or_insert(rec.response_text);
                    }
                    Err(e) if !line.trim().is_empty() => {
                        tracing::warn!(path = %path.display(), error = %e, "skipping unreadable cache record");
                    }
                    Err(_) => {}
                }
            }
        } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        let existing = std::fs::read(&path).map_err(io)?;
        if existing.last().is_some_and(|&b| b != b'\n') {
            file.write_all(b"\n").map_err(io)?;
        }
        Ok(Self { path: Some(path), entries: RwLock::new(entries), writer: Mutex::new(Some(file)) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, hash: &str) -> Option<String> {
        self.entries.read().expect("cache lock").get(hash).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn put(&self, hash: &str, request: &ChatRequest, response_text: &str) -> Result<(), GatewayError> {
        let mut writer = self.writer.lock().expect("cache writer lock");
        {
            let mut entries = self.entries.write().expect("cache lock");
            if entries.contains_key(hash) {
                return Ok(());
            }
            entries.insert(hash.to_string(), response_text.to_string());
        }
        if let Some(file) = writer.as_mut() {
            let record = CacheRecord {
                hash: hash.to_string(),
                request: request.clone(),
                response_text: response_text.to_string(),
                timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            };
            let mut line = serde_json::to_string(&record).map_err(|e| GatewayError::Cache(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| GatewayError::Cache(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::request_hash;
    use super::*;

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache/responses.jsonl");
        let req = ChatRequest::default().user("hi");
        let hash = request_hash(&req);
        {
            let cache = ResponseCache::open(&path).unwrap();
            assert!(cache.get(&hash).is_none());
            cache.put(&hash, &req, "first").unwrap();
            cache.put(&hash, &req, "second").unwrap();
        }
        // Simulate a crash halfway through a later append.
        std::fs::OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"hash\":\"abc").unwrap();
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.get(&hash).as_deref(), Some("first"));
        assert_eq!(cache.len(), 1);
        let other = ChatRequest::default().user("again");
        cache.put(&request_hash(&other), &other, "later").unwrap();
        drop(cache);
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.get(&request_hash(&other)).as_deref(), Some("later"));
        assert_eq!(cache.len(), 2);
    }
}
