use serde::{Deserialize, Serialize};

use crate::GatewayError;

pub const DEFAULT_MAX_NEW_TOKENS: u32 = 128;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decode {
    #[default]
    Greedy,
}

impl Decode {
    pub fn as_str(self) -> &'static str {
        match self {
            Decode::Greedy => "greedy",
        }
    }
}

/// Request/response shape of the endpoint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    /// OpenAI-compatible `/v1/chat/completions`: the prompt is one user
    /// message; greedy = temperature 0, top_p 1.
    #[default]
    OpenaiChat,
    /// text-generation-inference style `/generate`: raw prompt text,
    /// `do_sample: false`.
    TextGeneration,
}

fn default_max_new_tokens() -> u32 {
    DEFAULT_MAX_NEW_TOKENS
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_timeout() -> u64 {
    120
}
fn default_in_flight() -> usize {
    4
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Model name sent to the endpoint; part of the cache key.
    pub model: String,
    /// Full URL of the completion route.
    pub endpoint: String,
    #[serde(default)]
    pub dialect: Dialect,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: u32,
    #[serde(default)]
    pub decode: Decode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Name of the environment variable holding a bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Extra attempts after a transport failure.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// First backoff delay; doubles on each retry.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

impl ModelConfig {
    pub fn new(model: impl Into<String>, endpoint: impl Into<String>) -> Self {
        ModelConfig {
            model: model.into(),
            endpoint: endpoint.into(),
            dialect: Dialect::default(),
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            decode: Decode::Greedy,
            seed: DEFAULT_SEED,
            api_key_env: None,
            timeout_secs: default_timeout(),
            max_in_flight: default_in_flight(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be at least 1".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(GatewayError::Config("max_new_tokens must be positive".into()));
        }
        if self.model.is_empty() {
            return Err(GatewayError::Config("model name is empty".into()));
        }
        Ok(())
    }

    /// Request body for one prompt in this config's dialect.
    pub fn request_body(&self, prompt: &str) -> serde_json::Value {
        match self.dialect {
            Dialect::OpenaiChat => serde_json::json!({
                "model": self.model,
                "messages": [{"role": "user", "content": prompt}],
                "max_tokens": self.max_new_tokens,
                "temperature": 0.0,
                "top_p": 1.0,
                "seed": self.seed,
                "n": 1,
                "stream": false,
            }),
            Dialect::TextGeneration => serde_json::json!({
                "inputs": prompt,
                "parameters": {
                    "max_new_tokens": self.max_new_tokens,
                    "do_sample": false,
                    "seed": self.seed,
                    "return_full_text": false,
                },
            }),
        }
    }

    /// Completion text from a 2xx response body, if the body has the
    /// dialect's shape.
    pub fn extract_text(&self, body: &serde_json::Value) -> Option<String> {
        match self.dialect {
            Dialect::OpenaiChat => match body["choices"][0]["message"].get("content")? {
                serde_json::Value::String(s) => Some(s.clone()),
                serde_json::Value::Null => Some(String::new()),
                _ => None,
            },
            Dialect::TextGeneration => {
                let item = if body.is_array() { &body[0] } else { body };
                item["generated_text"].as_str().map(str::to_owned)
            }
        }
    }
}
