use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::{cache_key, CachedCompletion, CompletionCache};
use crate::config::ModelConfig;
use crate::GatewayError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    HttpError,
    Timeout,
    Empty,
}

impl Status {
    /// Replies from the model (including empty ones) are cached; failures
    /// are not, so a later run tries again.
    pub fn is_reply(self) -> bool {
        matches!(self, Status::Ok | Status::Empty)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub status: Status,
    pub latency_ms: u64,
    /// SHA-256 of the raw response body; empty when no body was received.
    pub response_hash: String,
    #[serde(default)]
    pub from_cache: bool,
    /// Failure description for http_error / timeout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Shareable across threads; at most `max_in_flight` HTTP requests are
/// outstanding at any time no matter how many threads call in.
pub struct Gateway {
    cfg: ModelConfig,
    client: Option<reqwest::blocking::Client>,
    api_key: Option<String>,
    cache: CompletionCache,
    slots: Slots,
    network_requests: AtomicUsize,
}

enum Attempt {
    Done(Completion),
    Retry(Completion),
}

impl Gateway {
    pub fn new(cfg: ModelConfig, cache: CompletionCache) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| GatewayError::MissingApiKey(var.clone()))?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Client(e.to_string()))?;
        Ok(Gateway {
            slots: Slots {
                free: Mutex::new(cfg.max_in_flight),
                cv: Condvar::new(),
            },
            cfg,
            client: Some(client),
            api_key,
            cache,
            network_requests: AtomicUsize::new(0),
        })
    }

    /// Cache-only gateway: misses are errors and no network is touched.
    pub fn offline(cfg: ModelConfig, cache: CompletionCache) -> Result<Self, GatewayError> {
        cfg.validate()?;
        Ok(Gateway {
            slots: Slots {
                free: Mutex::new(cfg.max_in_flight),
                cv: Condvar::new(),
            },
            cfg,
            client: None,
            api_key: None,
            cache,
            network_requests: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn cache(&self) -> &CompletionCache {
        &self.cache
    }

    pub fn is_offline(&self) -> bool {
        self.client.is_none()
    }

    /// HTTP requests sent so far, retries included.
    pub fn network_requests(&self) -> usize {
        self.network_requests.load(Ordering::SeqCst)
    }

    pub fn key_for(&self, prompt: &str) -> String {
        cache_key(&self.cfg, prompt)
    }

    /// One completion. Transport failures come back as a completion with
    /// status `http_error` or `timeout` and empty text, not as an error.
    pub fn translate(&self, prompt: &str) -> Result<Completion, GatewayError> {
        let key = self.key_for(prompt);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(Completion {
                text: hit.text,
                status: hit.status,
                latency_ms: 0,
                response_hash: hit.response_hash,
                from_cache: true,
                detail: None,
            });
        }
        let Some(client) = &self.client else {
            return Err(GatewayError::OfflineMiss { key });
        };
        let completion = {
            let _permit = self.slots.acquire();
            self.request_with_retries(client, prompt)
        };
        if completion.status.is_reply() {
            self.cache.insert(CachedCompletion {
                key,
                text: completion.text.clone(),
                status: completion.status,
                response_hash: completion.response_hash.clone(),
            });
        }
        Ok(completion)
    }

    /// Translates all prompts with up to `max_in_flight` worker threads;
    /// results are returned in input order.
    pub fn translate_all(&self, prompts: &[String]) -> Vec<Result<Completion, GatewayError>> {
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<Completion, GatewayError>>>> = Mutex::new((0..prompts.len()).map(|_| None).collect());
        let workers = self.cfg.max_in_flight.min(prompts.len()).max(1);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= prompts.len() {
                        break;
                    }
                    let r = self.translate(&prompts[i]);
                    results.lock().unwrap()[i] = Some(r);
                });
            }
        });
        results.into_inner().unwrap().into_iter().map(|r| r.expect("every prompt handled")).collect()
    }

    fn request_with_retries(&self, client: &reqwest::blocking::Client, prompt: &str) -> Completion {
        let start = Instant::now();
        let body = self.cfg.request_body(prompt);
        let mut attempt = 0;
        loop {
            let outcome = self.attempt(client, &body);
            match outcome {
                Attempt::Done(mut c) => {
                    c.latency_ms = start.elapsed().as_millis() as u64;
                    return c;
                }
                Attempt::Retry(mut c) if attempt >= self.cfg.max_retries => {
                    c.latency_ms = start.elapsed().as_millis() as u64;
                    return c;
                }
                Attempt::Retry(_) => {
                    thread::sleep(Duration::from_millis(self.cfg.backoff_ms.saturating_mul(1 << attempt.min(16))));
                    attempt += 1;
                }
            }
        }
    }

    fn attempt(&self, client: &reqwest::blocking::Client, body: &serde_json::Value) -> Attempt {
        let failed = |status: Status, detail: String, hash: String| Completion {
            text: String::new(),
            status,
            latency_ms: 0,
            response_hash: hash,
            from_cache: false,
            detail: Some(detail),
        };
        self.network_requests.fetch_add(1, Ordering::SeqCst);
        let mut req = client.post(&self.cfg.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(failed(Status::Timeout, e.to_string(), String::new())),
            Err(e) => return Attempt::Retry(failed(Status::HttpError, e.to_string(), String::new())),
        };
        let code = resp.status();
        let bytes = match resp.bytes() {
            Ok(b) => b,
            Err(e) if e.is_timeout() => return Attempt::Retry(failed(Status::Timeout, e.to_string(), String::new())),
            Err(e) => return Attempt::Retry(failed(Status::HttpError, e.to_string(), String::new())),
        };
        let hash = hex::encode(Sha256::digest(&bytes));
        if code.is_server_error() || code.as_u16() == 429 {
            return Attempt::Retry(failed(Status::HttpError, format!("HTTP {code}"), hash));
        }
        if !code.is_success() {
            return Attempt::Done(failed(Status::HttpError, format!("HTTP {code}"), hash));
        }
        let text = serde_json::from_slice::<serde_json::Value>(&bytes)
            .ok()
            .and_then(|v| self.cfg.extract_text(&v));
        match text {
            None => Attempt::Done(failed(Status::HttpError, "unrecognized response body".into(), hash)),
            Some(t) => {
                let t = t.trim().to_owned();
                Attempt::Done(Completion {
                    status: if t.is_empty() { Status::Empty } else { Status::Ok },
                    text: t,
                    latency_ms: 0,
                    response_hash: hash,
                    from_cache: false,
                    detail: None,
                })
            }
        }
    }
}
