//! BERTScore by delegation: a client for the scoring sidecar's line-JSON
//! protocol, a score cache keyed by (model, rescaling, hypothesis,
//! reference), and an in-process stub for runs without the sidecar.
//!
//! Protocol: on connect the sidecar writes one hello line
//! `{"hello":"bertscore","model_id":..,"rescale_with_baseline":..}`. The
//! client then writes a batch of `{"id","hypothesis","reference"}` lines
//! and flushes; the sidecar answers with one `{"id","precision","recall","f1"}`
//! line per request, in any order. A failed item is `{"id","error"}`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("cannot start sidecar `{command}`: {source}")]
    Spawn { command: String, source: io::Error },
    #[error("cannot connect to sidecar at {addr}: {source}")]
    Connect { addr: String, source: io::Error },
    #[error("sidecar i/o: {0}")]
    Io(#[from] io::Error),
    #[error("sidecar closed the stream before sending a hello line")]
    NoHello,
    #[error("malformed hello line {line:?}: {message}")]
    BadHello { line: String, message: String },
    #[error("sidecar closed the stream after {received} of {expected} responses")]
    Closed { received: usize, expected: usize },
    #[error("malformed response line {line:?}: {message}")]
    BadResponse { line: String, message: String },
    #[error("response ids do not match the request batch: {0}")]
    IdMismatch(String),
    #[error("sidecar failed on item {id}: {message}")]
    Remote { id: u64, message: String },
    #[error(
        "BERTScore sidecar unavailable and {missing} (hypothesis, reference) pairs are not cached; \
         start the sidecar, or run offline with a score cache that covers every pair"
    )]
    Unavailable { missing: usize },
    #[error("score cache {path}: line {line}: {message}")]
    Cache { path: PathBuf, line: usize, message: String },
}

/// Model identity announced by the sidecar; part of every cache key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub rescale_with_baseline: bool,
}

#[derive(Serialize, Deserialize)]
struct HelloLine {
    hello: String,
    model_id: String,
    rescale_with_baseline: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Serialize, Deserialize)]
pub struct Request<'a> {
    pub id: u64,
    pub hypothesis: &'a str,
    pub reference: &'a str,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(flatten)]
    pub scores: Option<Prf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn hello_line(model: &ModelInfo) -> String {
    serde_json::to_string(&HelloLine {
        hello: "bertscore".to_owned(),
        model_id: model.model_id.clone(),
        rescale_with_baseline: model.rescale_with_baseline,
    })
    .unwrap()
}

/// A connection to one sidecar. Holds at most one outstanding batch.
pub struct SidecarClient {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    model: ModelInfo,
    child: Option<Child>,
}

impl std::fmt::Debug for SidecarClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SidecarClient").field("model", &self.model).finish_non_exhaustive()
    }
}

impl SidecarClient {
    /// Wraps an already-open stream pair and reads the hello line.
    pub fn from_streams(mut reader: Box<dyn BufRead + Send>, writer: Box<dyn Write + Send>) -> Result<Self, SidecarError> {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(SidecarError::NoHello);
        }
        let hello: HelloLine = serde_json::from_str(line.trim_end()).map_err(|e| SidecarError::BadHello {
            line: line.trim_end().to_owned(),
            message: e.to_string(),
        })?;
        Ok(SidecarClient {
            reader,
            writer,
            model: ModelInfo {
                model_id: hello.model_id,
                rescale_with_baseline: hello.rescale_with_baseline,
            },
            child: None,
        })
    }

    /// Launches the sidecar as a child process speaking over stdin/stdout.
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, SidecarError> {
        let command = std::iter::once(program.to_owned()).chain(args.iter().cloned()).collect::<Vec<_>>().join(" ");
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| SidecarError::Spawn { command, source })?;
        let stdout = child.stdout.take().expect("piped stdout");
        let stdin = child.stdin.take().expect("piped stdin");
        let mut client = Self::from_streams(Box::new(BufReader::new(stdout)), Box::new(BufWriter::new(stdin)))?;
        client.child = Some(child);
        Ok(client)
    }

    /// Connects to a sidecar listening on a local socket address.
    pub fn connect(addr: &str, timeout: Duration) -> Result<Self, SidecarError> {
        let stream = TcpStream::connect(addr).map_err(|source| SidecarError::Connect {
            addr: addr.to_owned(),
            source,
        })?;
        stream.set_read_timeout(Some(timeout))?;
        let reader = BufReader::new(stream.try_clone()?);
        Self::from_streams(Box::new(reader), Box::new(BufWriter::new(stream)))
    }

    pub fn model(&self) -> &ModelInfo {
        &self.model
    }

    /// Sends one batch and returns scores in request order.
    pub fn score_batch(&mut self, pairs: &[(&str, &str)]) -> Result<Vec<Prf>, SidecarError> {
        for (i, (h, r)) in pairs.iter().enumerate() {
            let req = Request {
                id: i as u64,
                hypothesis: h,
                reference: r,
            };
            serde_json::to_writer(&mut self.writer, &req).map_err(io::Error::from)?;
            self.writer.write_all(b"\n")?;
        }
        self.writer.flush()?;
        let mut out: Vec<Option<Prf>> = vec![None; pairs.len()];
        let mut line = String::new();
        for received in 0..pairs.len() {
            line.clear();
            if self.reader.read_line(&mut line)? == 0 {
                return Err(SidecarError::Closed {
                    received,
                    expected: pairs.len(),
                });
            }
            let resp: Response = serde_json::from_str(line.trim_end()).map_err(|e| SidecarError::BadResponse {
                line: line.trim_end().to_owned(),
                message: e.to_string(),
            })?;
            if let Some(message) = resp.error {
                return Err(SidecarError::Remote { id: resp.id, message });
            }
            let idx = usize::try_from(resp.id).ok().filter(|&i| i < pairs.len()).ok_or_else(|| {
                SidecarError::IdMismatch(format!("unknown id {} in a batch of {}", resp.id, pairs.len()))
            })?;
            let scores = resp.scores.ok_or_else(|| SidecarError::BadResponse {
                line: line.trim_end().to_owned(),
                message: "missing precision/recall/f1".to_owned(),
            })?;
            if out[idx].replace(scores).is_some() {
                return Err(SidecarError::IdMismatch(format!("id {idx} answered twice")));
            }
        }
        Ok(out.into_iter().map(|s| s.expect("every slot filled")).collect())
    }
}

impl Drop for SidecarClient {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Cache key: SHA-256 over the JSON array `[model_id, rescale, hyp, ref]`.
pub fn cache_key(model: &ModelInfo, hypothesis: &str, reference: &str) -> String {
    let payload = serde_json::to_string(&(&model.model_id, model.rescale_with_baseline, hypothesis, reference)).unwrap();
    hex::encode(Sha256::digest(payload.as_bytes()))
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    #[serde(flatten)]
    scores: Prf,
}

/// Scores by cache key. Writes are serialized internally, so one cache can
/// be shared between threads.
#[derive(Debug, Default)]
pub struct BertCache {
    entries: Mutex<BTreeMap<String, Prf>>,
}

impl BertCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<Prf> {
        self.entries.lock().unwrap().get(key).copied()
    }

    pub fn insert(&self, key: String, scores: Prf) {
        self.entries.lock().unwrap().insert(key, scores);
    }

    /// Loads a JSONL cache file; a missing file yields an empty cache.
    pub fn load(path: &Path) -> Result<Self, SidecarError> {
        let cache = BertCache::new();
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => return Err(e.into()),
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: CacheLine = serde_json::from_str(line).map_err(|e| SidecarError::Cache {
                path: path.to_owned(),
                line: i + 1,
                message: e.to_string(),
            })?;
            cache.insert(parsed.key, parsed.scores);
        }
        Ok(cache)
    }

    /// Writes all entries sorted by key, one JSON object per line.
    pub fn save(&self, path: &Path) -> Result<(), SidecarError> {
        let mut out = String::new();
        for (key, scores) in self.entries.lock().unwrap().iter() {
            out.push_str(&serde_json::to_string(&CacheLine { key: key.clone(), scores: *scores }).unwrap());
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Deterministic stand-in scores: 1.0 for identical strings, otherwise
/// character-level chrF scaled to [0, 1]. Not BERTScore; for plumbing tests
/// and sidecar-free runs.
pub fn stub_scores(hypothesis: &str, reference: &str) -> Prf {
    if hypothesis == reference {
        return Prf {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let f = crate::chrf::sentence_chrf(hypothesis, reference, 0) / 100.0;
    Prf {
        precision: f,
        recall: f,
        f1: f,
    }
}

pub const STUB_MODEL_ID: &str = "stub-chrf";

enum Backend {
    Sidecar(SidecarClient),
    Stub,
    Offline,
}

/// Per-sentence results of one scoring call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BertScores {
    pub model: ModelInfo,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub mean_f1: f64,
}

pub struct BertScorer {
    backend: Backend,
    model: ModelInfo,
    cache: BertCache,
    pub batch_size: usize,
}

impl BertScorer {
    pub fn with_sidecar(client: SidecarClient, cache: BertCache) -> Self {
        BertScorer {
            model: client.model().clone(),
            backend: Backend::Sidecar(client),
            cache,
            batch_size: 512,
        }
    }

    /// Cache-only scoring; any miss is an error.
    pub fn offline(model: ModelInfo, cache: BertCache) -> Self {
        BertScorer {
            backend: Backend::Offline,
            model,
            cache,
            batch_size: 512,
        }
    }

    /// In-process [`stub_scores`] under the model id [`STUB_MODEL_ID`].
    pub fn stub() -> Self {
        BertScorer {
            backend: Backend::Stub,
            model: ModelInfo {
                model_id: STUB_MODEL_ID.to_owned(),
                rescale_with_baseline: false,
            },
            cache: BertCache::new(),
            batch_size: 512,
        }
    }

    pub fn model(&self) -> &ModelInfo {
        &self.model
    }

    pub fn cache(&self) -> &BertCache {
        &self.cache
    }

    pub fn score<H: AsRef<str>, R: AsRef<str>>(&mut self, hypotheses: &[H], references: &[R]) -> Result<BertScores, crate::MetricError> {
        crate::check_lengths(hypotheses.len(), references.len())?;
        let keys: Vec<String> = hypotheses
            .iter()
            .zip(references)
            .map(|(h, r)| cache_key(&self.model, h.as_ref(), r.as_ref()))
            .collect();
        let mut seen = HashSet::new();
        let missing: Vec<usize> = (0..keys.len())
            .filter(|&i| self.cache.get(&keys[i]).is_none() && seen.insert(keys[i].clone()))
            .collect();
        match &mut self.backend {
            _ if missing.is_empty() => {}
            Backend::Offline => return Err(SidecarError::Unavailable { missing: missing.len() }.into()),
            Backend::Stub => {
                for &i in &missing {
                    self.cache.insert(keys[i].clone(), stub_scores(hypotheses[i].as_ref(), references[i].as_ref()));
                }
            }
            Backend::Sidecar(client) => {
                for chunk in missing.chunks(self.batch_size.max(1)) {
                    let pairs: Vec<(&str, &str)> = chunk.iter().map(|&i| (hypotheses[i].as_ref(), references[i].as_ref())).collect();
                    let scores = client.score_batch(&pairs)?;
                    for (&i, s) in chunk.iter().zip(scores) {
                        self.cache.insert(keys[i].clone(), s);
                    }
                }
            }
        }
        let prf: Vec<Prf> = keys.iter().map(|k| self.cache.get(k).expect("filled above")).collect();
        let f1: Vec<f64> = prf.iter().map(|s| s.f1).collect();
        let mut sorted = f1.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(BertScores {
            model: self.model.clone(),
            precision: prf.iter().map(|s| s.precision).collect(),
            recall: prf.iter().map(|s| s.recall).collect(),
            mean_f1: sorted.iter().sum::<f64>() / sorted.len() as f64,
            f1,
        })
    }
}

/// Serves the protocol on one stream pair with the given scoring function,
/// answering each batch in reverse order. Used by tests as a fake sidecar.
pub fn serve_stub<R: io::Read, W: Write>(mut reader: BufReader<R>, mut writer: W, model: &ModelInfo, score: impl Fn(&str, &str) -> Prf) -> io::Result<()> {
    writeln!(writer, "{}", hello_line(model))?;
    writer.flush()?;
    let mut batch: Vec<Response> = Vec::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        #[derive(Deserialize)]
        struct Owned {
            id: u64,
            hypothesis: String,
            reference: String,
        }
        let req: Owned = serde_json::from_str(line.trim_end()).map_err(io::Error::other)?;
        batch.push(Response {
            id: req.id,
            scores: Some(score(&req.hypothesis, &req.reference)),
            error: None,
        });
        // answer whatever has arrived once no complete request is buffered
        if !reader.buffer().contains(&b'\n') {
            for resp in batch.drain(..).rev() {
                writeln!(writer, "{}", serde_json::to_string(&resp).unwrap())?;
            }
            writer.flush()?;
        }
    }
}
