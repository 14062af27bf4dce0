//! Chat-completion gateway: sends prompts to an HTTP model endpoint under a
//! fixed decoding contract (greedy, 128 new tokens, seed 42 by default),
//! caches every well-formed reply under a content hash, bounds the number
//! of requests in flight and retries transport failures.

pub mod cache;
pub mod config;
mod gateway;
#[cfg(feature = "testkit")]
pub mod stub;

use std::path::PathBuf;

use thiserror::Error;

pub use cache::{cache_key, CachedCompletion, CompletionCache, ImportSummary};
pub use config::{Decode, Dialect, ModelConfig, DEFAULT_MAX_NEW_TOKENS, DEFAULT_SEED};
pub use gateway::{Completion, Gateway, Status};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("environment variable {0} (API key) is not set")]
    MissingApiKey(String),
    #[error("offline mode: no cached completion for key {key}")]
    OfflineMiss { key: String },
    #[error("cannot build HTTP client: {0}")]
    Client(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: line {line}: {message}")]
    CorruptCache { path: PathBuf, line: usize, message: String },
    #[error("{path}: line {line}: cached text for key {key} differs from the existing entry")]
    CacheConflict { path: PathBuf, line: usize, key: String },
}
