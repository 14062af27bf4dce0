//! Per-sentence translation records and per-run manifests.
//!
//! A run is persisted as `<stem>.jsonl` (one record per line, corpus order)
//! plus `<stem>.manifest.json`. Nothing timing-dependent is stored, so two
//! runs over a warm cache produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use udprompt_core::conllu::ParseSource;
use udprompt_core::prompt::Setting;
use udprompt_gateway::Status;
use udprompt_metrics::ScoreReport;

use crate::corpus::Split;
use crate::{Result, RunnerError};

pub const WARN_CONTEXT_BUDGET: &str = "context-budget";
pub const WARN_EMPTY_COMPLETION: &str = "empty-completion";
pub const WARN_REQUEST_FAILED: &str = "request-failed";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceScores {
    pub bertscore_precision: f64,
    pub bertscore_recall: f64,
    pub bertscore_f1: f64,
    pub sentence_bleu_relaxed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub sentence_id: String,
    pub split: Split,
    pub setting: Setting,
    pub model: String,
    pub parse_source: ParseSource,
    /// SHA-256 of the prompt text.
    pub prompt_hash: String,
    pub prompt_tokens: usize,
    pub completion: String,
    pub status: Status,
    pub reference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bible: Option<bool>,
    pub scores: SentenceScores,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TranslationRecord {
    /// The uniqueness key of a record across all runs.
    pub fn key(&self) -> (String, Setting, String, ParseSource) {
        (self.sentence_id.clone(), self.setting, self.model.clone(), self.parse_source)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub split: Split,
    pub setting: Setting,
    pub model: String,
    pub parse_source: ParseSource,
    pub records: usize,
    /// Name → SHA-256 of every input that can change a record.
    pub hashes: BTreeMap<String, String>,
    pub bertscore_model: String,
    pub bertscore_rescaled: bool,
    pub corpus_scores: ScoreReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub records: Vec<TranslationRecord>,
    pub manifest: Manifest,
}

/// Characters that are awkward in file names are replaced by `_`.
fn file_part(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "+-._".contains(c) { c } else { '_' })
        .collect()
}

impl RunOutput {
    pub fn stem(&self) -> String {
        let m = &self.manifest;
        format!("{}.{}.{}.{}", m.split, file_part(&m.model), m.parse_source, m.setting.name())
    }

    pub fn records_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n"
    }

    /// Writes both files into `dir`. An existing record file is never
    /// rewritten: identical content is accepted as a replay, anything else
    /// is an error. Returns the record file path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|source| RunnerError::Io { path: dir.to_owned(), source })?;
        let stem = self.stem();
        let records = dir.join(format!("{stem}.jsonl"));
        let manifest = dir.join(format!("{stem}.manifest.json"));
        for (path, body) in [(&records, self.records_jsonl()), (&manifest, self.manifest_json())] {
            match fs::read(path) {
                Ok(existing) if existing == body.as_bytes() => continue,
                Ok(_) => return Err(RunnerError::RecordConflict { path: path.clone() }),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(source) => return Err(RunnerError::Io { path: path.clone(), source }),
            }
            let io = |source| RunnerError::Io { path: path.clone(), source };
            let mut f = fs::OpenOptions::new().write(true).create_new(true).open(path).map_err(io)?;
            f.write_all(body.as_bytes()).map_err(io)?;
        }
        Ok(records)
    }
}

/// Reads a record file; blank lines are skipped.
pub fn read_records(path: &Path) -> Result<Vec<TranslationRecord>> {
    let text = crate::read_file(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RunnerError::BadRecord {
                path: path.to_owned(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
