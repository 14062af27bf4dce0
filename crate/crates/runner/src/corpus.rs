//! Evaluation corpora: automatic (and optionally gold) CoNLL-U parses plus a
//! references table `sent_id <TAB> english_reference <TAB> bible_flag`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use udprompt_core::conllu::{parse_document, Document, ParseSource, Sentence};

use crate::{read_file, Result, RunnerError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Dev,
    Test,
    Ostraca,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Ostraca => "ostraca",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            "ostraca" => Ok(Split::Ostraca),
            other => Err(format!("unknown split `{other}` (expected dev, test or ostraca)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceRow {
    pub sent_id: String,
    pub reference: String,
    pub bible: Option<bool>,
}

/// Parse the references table. The header row is required; the flag column
/// may be omitted or left empty, otherwise it must be 0/1/true/false.
pub fn parse_references(text: &str, path: &Path) -> Result<Vec<ReferenceRow>> {
    let err = |line: usize, message: String| RunnerError::References {
        path: path.to_owned(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r').split('\t').next() == Some("sent_id") => {}
        _ => return Err(err(1, "missing header `sent_id<TAB>english_reference<TAB>bible_flag`".to_owned())),
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&cols.len()) {
            return Err(err(i + 1, format!("expected 2 or 3 tab-separated columns, found {}", cols.len())));
        }
        let sent_id = cols[0].trim();
        if sent_id.is_empty() {
            return Err(err(i + 1, "empty sent_id".to_owned()));
        }
        if !seen.insert(sent_id.to_owned()) {
            return Err(err(i + 1, format!("duplicate sent_id `{sent_id}`")));
        }
        let bible = match cols.get(2).map(|c| c.trim()) {
            None | Some("") => None,
            Some("1") | Some("true") => Some(true),
            Some("0") | Some("false") => Some(false),
            Some(other) => return Err(err(i + 1, format!("bad bible_flag `{other}`"))),
        };
        rows.push(ReferenceRow {
            sent_id: sent_id.to_owned(),
            reference: cols[1].to_owned(),
            bible,
        });
    }
    Ok(rows)
}

/// File locations for one split, as given in the config.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    pub auto: PathBuf,
    #[serde(default)]
    pub gold: Option<PathBuf>,
    pub references: PathBuf,
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub split: Split,
    pub auto: Document,
    pub gold: Option<Document>,
    pub references: BTreeMap<String, String>,
    pub bible: BTreeMap<String, bool>,
}

impl Corpus {
    /// Checks: sentence ids unique, every sentence has a reference, dev
    /// sentences all carry a Bible flag, gold parses cover the same ids in
    /// the same order. Reference rows for other splits are ignored.
    pub fn new(split: Split, auto: Document, gold: Option<Document>, rows: Vec<ReferenceRow>) -> Result<Self> {
        let mut ids = HashSet::new();
        for s in &auto.sentences {
            if !ids.insert(s.source_id.as_str()) {
                return Err(RunnerError::Corpus(format!("duplicate sentence id `{}` in {}", s.source_id, auto.origin)));
            }
        }
        if let Some(g) = &gold {
            let a: Vec<&str> = auto.sentences.iter().map(|s| s.source_id.as_str()).collect();
            let b: Vec<&str> = g.sentences.iter().map(|s| s.source_id.as_str()).collect();
            if a != b {
                return Err(RunnerError::Corpus(format!(
                    "gold parses ({}) do not cover the same sentence ids as the automatic parses ({})",
                    g.origin, auto.origin
                )));
            }
        }
        let mut references = BTreeMap::new();
        let mut bible = BTreeMap::new();
        for row in rows {
            if ids.contains(row.sent_id.as_str()) {
                if let Some(flag) = row.bible {
                    bible.insert(row.sent_id.clone(), flag);
                }
                references.insert(row.sent_id, row.reference);
            }
        }
        let missing: Vec<&str> = auto
            .sentences
            .iter()
            .map(|s| s.source_id.as_str())
            .filter(|id| !references.contains_key(*id))
            .collect();
        if !missing.is_empty() {
            return Err(RunnerError::Corpus(format!("{} sentence(s) without a reference, first `{}`", missing.len(), missing[0])));
        }
        if split == Split::Dev {
            if let Some(s) = auto.sentences.iter().find(|s| !bible.contains_key(&s.source_id)) {
                return Err(RunnerError::Corpus(format!("dev sentence `{}` has no bible_flag", s.source_id)));
            }
        }
        Ok(Corpus {
            split,
            auto,
            gold,
            references,
            bible,
        })
    }

    pub fn load(split: Split, paths: &CorpusPaths) -> Result<Self> {
        let doc = |path: &Path, source| -> Result<Document> { Ok(parse_document(&read_file(path)?, &path.display().to_string(), source)?) };
        let auto = doc(&paths.auto, ParseSource::Automatic)?;
        let gold = paths.gold.as_deref().map(|p| doc(p, ParseSource::Gold)).transpose()?;
        let rows = parse_references(&read_file(&paths.references)?, &paths.references)?;
        Corpus::new(split, auto, gold, rows)
    }

    pub fn len(&self) -> usize {
        self.auto.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.auto.sentences.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.auto.sentences.iter().map(|s| s.source_id.as_str()).collect()
    }

    pub fn sentences(&self, source: ParseSource) -> Result<&[Sentence]> {
        match source {
            ParseSource::Automatic => Ok(&self.auto.sentences),
            ParseSource::Gold => self
                .gold
                .as_ref()
                .map(|g| g.sentences.as_slice())
                .ok_or(RunnerError::MissingGold(self.split)),
        }
    }

    pub fn reference(&self, id: &str) -> &str {
        &self.references[id]
    }

    /// The corpus restricted to `ids`, keeping corpus order.
    pub fn subset(&self, ids: &[String]) -> Result<Corpus> {
        let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        let known: BTreeSet<&str> = self.ids().into_iter().collect();
        if let Some(id) = wanted.difference(&known).next() {
            return Err(RunnerError::Corpus(format!("unknown sentence id `{id}`")));
        }
        let keep = |d: &Document| {
            let mut out = Document::new(d.origin.clone(), d.parse_source);
            out.sentences = d.sentences.iter().filter(|s| wanted.contains(s.source_id.as_str())).cloned().collect();
            out
        };
        Ok(Corpus {
            split: self.split,
            auto: keep(&self.auto),
            gold: self.gold.as_ref().map(keep),
            references: self.references.iter().filter(|(k, _)| wanted.contains(k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect(),
            bible: self.bible.iter().filter(|(k, _)| wanted.contains(k.as_str())).map(|(k, v)| (k.clone(), *v)).collect(),
        })
    }

    /// SHA-256 over the serialized parses and references, for manifests.
    pub fn fingerprint(&self, source: ParseSource) -> Result<String> {
        let mut text = String::new();
        for s in self.sentences(source)? {
            text.push_str(&s.to_conllu());
            text.push('\t');
            text.push_str(self.reference(&s.source_id));
            text.push('\n');
        }
        Ok(crate::sha256_hex(text.as_bytes()))
    }
}
