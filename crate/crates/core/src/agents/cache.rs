//! Deterministic replay cache for chat completions.
//!
//! One file per entry; the filename is the SHA-256 of the serialized request
//! (model id, full message list, temperature, max tokens, seed). Entries
//! store the request and response verbatim and are immutable once written,
//! so a warm cache replays a run without any network.

use super::wire::{ChatRequest, ChatResponse};
use super::AgentError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

#[derive(Serialize, Deserialize)]
struct StoredExchange {
    request: ChatRequest,
    response: ChatResponse,
}

pub struct ResponseCache {
    dir: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> Result<Self, AgentError> {
        std::fs::create_dir_all(dir).map_err(|e| AgentError::Cache(e.to_string()))?;
        Ok(ResponseCache {
            dir: dir.to_path_buf(),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    fn entry_path(&self, request: &ChatRequest) -> PathBuf {
        let canonical = serde_json::to_vec(request).expect("request serialization cannot fail");
        let digest = Sha256::digest(&canonical);
        self.dir.join(format!("{}.json", hex::encode(digest)))
    }

    pub fn get(&self, request: &ChatRequest) -> Option<ChatResponse> {
        let bytes = match std::fs::read(self.entry_path(request)) {
            Ok(b) => b,
            Err(_) => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                return None;
            }
        };
        match serde_json::from_slice::<StoredExchange>(&bytes) {
            Ok(entry) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(entry.response)
            }
            Err(_) => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    pub fn put(&self, request: &ChatRequest, response: &ChatResponse) -> Result<(), AgentError> {
        let path = self.entry_path(request);
        let entry = StoredExchange {
            request: request.clone(),
            response: response.clone(),
        };
        let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
        let bytes = serde_json::to_vec_pretty(&entry).expect("serializable");
        std::fs::write(&tmp, bytes).map_err(|e| AgentError::Cache(e.to_string()))?;
        std::fs::rename(&tmp, &path).map_err(|e| AgentError::Cache(e.to_string()))?;
        Ok(())
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }
}
