//! Completion cache keyed by a SHA-256 of the request identity, with a
//! line-delimited export format.
//!
//! Export format: one JSON object per line, sorted by key
//! (`{"key","text","status","response_hash"}`), followed by a trailer
//! line `{"end":N}` with the entry count. A file without a matching
//! trailer is treated as truncated.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ModelConfig;
use crate::gateway::Status;
use crate::GatewayError;

/// SHA-256 over the JSON array `[model, prompt, max_new_tokens, decode, seed]`.
pub fn cache_key(cfg: &ModelConfig, prompt: &str) -> String {
    let payload = serde_json::to_string(&(&cfg.model, prompt, cfg.max_new_tokens, cfg.decode.as_str(), cfg.seed)).unwrap();
    hex::encode(Sha256::digest(payload.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CachedCompletion {
    pub key: String,
    pub text: String,
    pub status: Status,
    pub response_hash: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Trailer {
    end: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ImportSummary {
    pub added: usize,
    pub unchanged: usize,
}

/// Shared cache; writes are serialized by an internal lock.
#[derive(Debug, Default)]
pub struct CompletionCache {
    entries: Mutex<BTreeMap<String, CachedCompletion>>,
}

impl CompletionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<CachedCompletion> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    pub fn insert(&self, entry: CachedCompletion) {
        self.entries.lock().unwrap().insert(entry.key.clone(), entry);
    }

    /// All entries, sorted by key.
    pub fn entries(&self) -> Vec<CachedCompletion> {
        self.entries.lock().unwrap().values().cloned().collect()
    }

    pub fn export(&self, path: &Path) -> Result<usize, GatewayError> {
        let entries = self.entries();
        let mut out = String::new();
        for e in &entries {
            out.push_str(&serde_json::to_string(e).unwrap());
            out.push('\n');
        }
        out.push_str(&format!("{{\"end\":{}}}\n", entries.len()));
        let io = |source| GatewayError::Io {
            path: path.to_owned(),
            source,
        };
        let tmp = path.with_extension("partial");
        fs::write(&tmp, out).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)?;
        Ok(entries.len())
    }

    /// Merges an exported file. The whole file is validated before anything
    /// is merged: a corrupt or truncated file, or a key whose text differs
    /// from the entry already present, leaves the cache untouched.
    pub fn import(&self, path: &Path) -> Result<ImportSummary, GatewayError> {
        let text = fs::read_to_string(path).map_err(|source| GatewayError::Io {
            path: path.to_owned(),
            source,
        })?;
        let corrupt = |line: usize, message: String| GatewayError::CorruptCache {
            path: path.to_owned(),
            line,
            message,
        };
        let lines: Vec<&str> = text.lines().collect();
        let mut incoming: Vec<(usize, CachedCompletion)> = Vec::new();
        let mut trailer: Option<usize> = None;
        for (i, line) in lines.iter().enumerate() {
            let n = i + 1;
            if trailer.is_some() {
                return Err(corrupt(n, "content after the end marker".into()));
            }
            if let Ok(t) = serde_json::from_str::<Trailer>(line) {
                if t.end != incoming.len() {
                    return Err(corrupt(n, format!("end marker counts {} entries, found {}", t.end, incoming.len())));
                }
                trailer = Some(n);
                continue;
            }
            let entry: CachedCompletion = serde_json::from_str(line).map_err(|e| corrupt(n, e.to_string()))?;
            if entry.key.len() != 64 || !entry.key.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(corrupt(n, format!("malformed key {:?}", entry.key)));
            }
            incoming.push((n, entry));
        }
        if trailer.is_none() {
            return Err(corrupt(lines.len() + 1, "missing end marker (file truncated?)".into()));
        }

        let mut map = self.entries.lock().unwrap();
        let mut merged = map.clone();
        let mut summary = ImportSummary::default();
        for (n, entry) in incoming {
            match merged.get(&entry.key) {
                Some(old) if old.text != entry.text => {
                    return Err(GatewayError::CacheConflict {
                        path: path.to_owned(),
                        line: n,
                        key: entry.key,
                    })
                }
                Some(_) => summary.unchanged += 1,
                None => summary.added += 1,
            }
            merged.insert(entry.key.clone(), entry);
        }
        *map = merged;
        Ok(summary)
    }

    /// Imports `path` if it exists; a missing file is an empty cache.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let cache = CompletionCache::new();
        if path.exists() {
            cache.import(path)?;
        }
        Ok(cache)
    }
}
