//! CoNLL-U reader, writer and validator.
//!
//! The sentence model keeps every input row so that a canonical document
//! serializes back to the same bytes. Multiword-token ranges (`4-5`) and
//! empty nodes (`5.1`) are kept verbatim as auxiliary rows; they take no part
//! in the dependency tree.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Whether a document came from an automatic parser or from a treebank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseSource {
    Automatic,
    Gold,
}

impl ParseSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseSource::Automatic => "auto",
            ParseSource::Gold => "gold",
        }
    }
}

impl fmt::Display for ParseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ParseSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" | "automatic" => Ok(ParseSource::Automatic),
            "gold" => Ok(ParseSource::Gold),
            other => Err(format!("unknown parse source `{other}` (expected auto or gold)")),
        }
    }
}

/// One syntactic word (a 10-column row with an integer id).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: Vec<(String, String)>,
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// Value of a morphological feature, if present.
    pub fn feat(&self, name: &str) -> Option<&str> {
        self.feats
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn is_root(&self) -> bool {
        self.head == 0
    }

    /// The serialized FEATS column.
    pub fn feats_column(&self) -> String {
        if self.feats.is_empty() {
            "_".to_owned()
        } else {
            self.feats
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join("|")
        }
    }

    /// The token as one tab-separated row.
    pub fn to_row(&self) -> String {
        let cols = [
            self.id.to_string(),
            blank(&self.form),
            blank(&self.lemma),
            blank(&self.upos),
            blank(&self.xpos),
            self.feats_column(),
            self.head.to_string(),
            blank(&self.deprel),
            blank(&self.deps),
            blank(&self.misc),
        ];
        cols.join("\t")
    }
}

fn blank(s: &str) -> String {
    if s.is_empty() {
        "_".to_owned()
    } else {
        s.to_owned()
    }
}

/// Whether a dependency label designates the root relation.
pub fn is_root_relation(deprel: &str) -> bool {
    deprel == "root" || deprel.starts_with("root:")
}

/// A sentence-level comment line, stored without the leading `#`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Comment {
    pub raw: String,
}

impl Comment {
    /// `(key, value)` for comments written as `# key = value`.
    pub fn key_value(&self) -> Option<(&str, &str)> {
        let (k, v) = self.raw.split_once(" = ")?;
        let k = k.trim();
        if k.is_empty() || k.contains(char::is_whitespace) {
            return None;
        }
        Some((k, v))
    }
}

/// A multiword-token range or an empty node, kept for serialization only.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AuxRow {
    /// Number of syntactic words that precede this row.
    pub position: usize,
    pub line: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    pub comments: Vec<Comment>,
    pub tokens: Vec<Token>,
    pub aux_rows: Vec<AuxRow>,
    pub source_id: String,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence {
            comments: Vec::new(),
            tokens,
            aux_rows: Vec::new(),
            source_id: String::new(),
        }
    }

    fn comment_value(&self, key: &str) -> Option<&str> {
        self.comments
            .iter()
            .filter_map(Comment::key_value)
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }

    /// The `# text = ...` comment, if any.
    pub fn text(&self) -> Option<&str> {
        self.comment_value("text")
    }

    /// The `# sent_id = ...` comment, if any.
    pub fn sent_id(&self) -> Option<&str> {
        self.comment_value("sent_id")
    }

    /// Source text: the `text` comment, else the forms joined by spaces.
    pub fn source_text(&self) -> String {
        match self.text() {
            Some(t) => t.to_owned(),
            None => self
                .tokens
                .iter()
                .map(|t| t.form.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    pub fn token(&self, id: usize) -> Option<&Token> {
        id.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    pub fn root(&self) -> Option<&Token> {
        self.tokens.iter().find(|t| t.head == 0)
    }

    /// Dependents of token `id` in surface order.
    pub fn children(&self, id: usize) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(move |t| t.head == id)
    }

    /// Token and auxiliary rows, without comments or the terminating blank line.
    pub fn rows(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.tokens.len() + self.aux_rows.len());
        let mut aux = self.aux_rows.iter().peekable();
        for (i, tok) in self.tokens.iter().enumerate() {
            while let Some(a) = aux.next_if(|a| a.position <= i) {
                out.push(a.line.clone());
            }
            out.push(tok.to_row());
        }
        out.extend(aux.map(|a| a.line.clone()));
        out
    }

    /// The sentence block: comments, rows, blank line.
    pub fn to_conllu(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push('#');
            out.push_str(&c.raw);
            out.push('\n');
        }
        for row in self.rows() {
            out.push_str(&row);
            out.push('\n');
        }
        out.push('\n');
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub sentences: Vec<Sentence>,
    pub origin: String,
    pub parse_source: ParseSource,
}

impl Document {
    pub fn new(origin: impl Into<String>, parse_source: ParseSource) -> Self {
        Document {
            sentences: Vec::new(),
            origin: origin.into(),
            parse_source,
        }
    }
}

/// Invariant broken by a sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// Ids are not `1..=n` in order.
    NonConsecutiveId,
    /// Token is its own head.
    SelfHead,
    /// Head refers to no token of the sentence.
    HeadOutOfRange,
    /// `head = 0` without a root label, or a root label with `head != 0`.
    RootLabelMismatch,
    NoRoot,
    MultipleRoots,
    /// Following heads from this token never reaches the root.
    Cycle,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::NonConsecutiveId => "ids must be consecutive from 1",
            ViolationKind::SelfHead => "token is its own head (cycle)",
            ViolationKind::HeadOutOfRange => "head out of range",
            ViolationKind::RootLabelMismatch => "head 0 iff root relation",
            ViolationKind::NoRoot => "no root token",
            ViolationKind::MultipleRoots => "more than one root token",
            ViolationKind::Cycle => "cycle detected",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Violation {
    /// Id of the offending token; 0 for sentence-level violations.
    pub token_id: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "token {}: {}", self.token_id, self.kind)
    }
}

/// Check every token and tree invariant of a sentence.
pub fn validate(sentence: &Sentence) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = sentence.tokens.len();
    let mut push = |token_id, kind| out.push(Violation { token_id, kind });

    for (i, t) in sentence.tokens.iter().enumerate() {
        if t.id != i + 1 {
            push(t.id, ViolationKind::NonConsecutiveId);
        }
        if t.head == t.id {
            push(t.id, ViolationKind::SelfHead);
        } else if t.head > n {
            push(t.id, ViolationKind::HeadOutOfRange);
        }
        if (t.head == 0) != is_root_relation(&t.deprel) {
            push(t.id, ViolationKind::RootLabelMismatch);
        }
    }
    if n == 0 {
        return out;
    }
    let roots: Vec<_> = sentence.tokens.iter().filter(|t| t.head == 0).collect();
    match roots.len() {
        0 => push(0, ViolationKind::NoRoot),
        1 => {}
        _ => {
            for r in &roots[1..] {
                push(r.id, ViolationKind::MultipleRoots);
            }
        }
    }

    // Tokens whose head chain loops without reaching 0. Positional indices
    // are used so this works even when ids themselves are broken.
    let mut state = vec![0u8; n]; // 0 unknown, 1 reaches root, 2 on a cycle
    for start in 0..n {
        let mut path = Vec::new();
        let mut cur = start;
        let verdict = loop {
            if state[cur] != 0 {
                break state[cur];
            }
            if path.contains(&cur) {
                break 2;
            }
            path.push(cur);
            let head = sentence.tokens[cur].head;
            if head == 0 || head > n {
                break 1;
            }
            cur = head - 1;
        };
        for p in path {
            state[p] = verdict;
        }
    }
    for (i, s) in state.iter().enumerate() {
        let t = &sentence.tokens[i];
        if *s == 2 && t.head != t.id {
            push(t.id, ViolationKind::Cycle);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// All problems found in a rejected document.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ConlluError {
    pub origin: String,
    pub errors: Vec<LineError>,
}

impl fmt::Display for ConlluError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} error(s)", self.origin, self.errors.len())?;
        for e in &self.errors {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Pending {
    comments: Vec<Comment>,
    tokens: Vec<Token>,
    token_lines: Vec<usize>,
    aux_rows: Vec<AuxRow>,
    first_line: usize,
}

impl Pending {
    fn is_empty(&self) -> bool {
        self.comments.is_empty() && self.tokens.is_empty() && self.aux_rows.is_empty()
    }
}

/// Parse a whole CoNLL-U document. Any error rejects the document.
pub fn parse_document(
    text: &str,
    origin: &str,
    parse_source: ParseSource,
) -> Result<Document, ConlluError> {
    let mut doc = Document::new(origin, parse_source);
    let mut errors = Vec::new();
    let mut pending = Pending::default();

    let finish = |pending: Pending, doc: &mut Document, errors: &mut Vec<LineError>| {
        if pending.tokens.is_empty() {
            errors.push(LineError {
                line: pending.first_line,
                message: "sentence has no tokens".to_owned(),
            });
            return;
        }
        let mut sentence = Sentence {
            comments: pending.comments,
            tokens: pending.tokens,
            aux_rows: pending.aux_rows,
            source_id: String::new(),
        };
        let violations = validate(&sentence);
        let before = errors.len();
        for v in violations {
            let line = sentence
                .tokens
                .iter()
                .position(|t| t.id == v.token_id)
                .map(|i| pending.token_lines[i])
                .unwrap_or(pending.first_line);
            errors.push(LineError {
                line,
                message: v.to_string(),
            });
        }
        if errors.len() > before {
            return;
        }
        sentence.source_id = match sentence.sent_id() {
            Some(id) => id.to_owned(),
            None => format!("{}#{}", origin, doc.sentences.len() + 1),
        };
        doc.sentences.push(sentence);
    };

    for (idx, raw) in text.split('\n').enumerate() {
        let lineno = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if !pending.is_empty() {
                finish(std::mem::take(&mut pending), &mut doc, &mut errors);
            }
            continue;
        }
        if pending.is_empty() {
            pending.first_line = lineno;
        }
        if let Some(c) = line.strip_prefix('#') {
            if !pending.tokens.is_empty() || !pending.aux_rows.is_empty() {
                errors.push(LineError {
                    line: lineno,
                    message: "comment line after token rows".to_owned(),
                });
                continue;
            }
            pending.comments.push(Comment { raw: c.to_owned() });
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            errors.push(LineError {
                line: lineno,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
            continue;
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            if !is_aux_id(id) {
                errors.push(LineError {
                    line: lineno,
                    message: format!("malformed id `{id}`"),
                });
                continue;
            }
            pending.aux_rows.push(AuxRow {
                position: pending.tokens.len(),
                line: line.to_owned(),
            });
            continue;
        }
        match parse_token(&cols) {
            Ok(tok) => {
                pending.tokens.push(tok);
                pending.token_lines.push(lineno);
            }
            Err(message) => errors.push(LineError {
                line: lineno,
                message,
            }),
        }
    }
    if !pending.is_empty() {
        finish(pending, &mut doc, &mut errors);
    }

    if errors.is_empty() {
        Ok(doc)
    } else {
        Err(ConlluError {
            origin: origin.to_owned(),
            errors,
        })
    }
}

fn is_aux_id(id: &str) -> bool {
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if let Some((a, b)) = id.split_once('-') {
        digits(a) && digits(b)
    } else if let Some((a, b)) = id.split_once('.') {
        digits(a) && digits(b)
    } else {
        false
    }
}

fn parse_token(cols: &[&str]) -> Result<Token, String> {
    let id: usize = cols[0]
        .parse()
        .map_err(|_| format!("non-integer id `{}`", cols[0]))?;
    if id == 0 {
        return Err("token id must be at least 1".to_owned());
    }
    let head: usize = cols[6]
        .parse()
        .map_err(|_| format!("non-integer head `{}`", cols[6]))?;
    let feats = parse_feats(cols[5])?;
    let field = |s: &str| if s == "_" { String::new() } else { s.to_owned() };
    Ok(Token {
        id,
        // A literal underscore form or lemma is kept as written.
        form: cols[1].to_owned(),
        lemma: cols[2].to_owned(),
        upos: field(cols[3]),
        xpos: field(cols[4]),
        feats,
        head,
        deprel: field(cols[7]),
        deps: field(cols[8]),
        misc: field(cols[9]),
    })
}

fn parse_feats(col: &str) -> Result<Vec<(String, String)>, String> {
    if col == "_" {
        return Ok(Vec::new());
    }
    col.split('|')
        .map(|kv| match kv.split_once('=') {
            Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k.to_owned(), v.to_owned())),
            _ => Err(format!("malformed feature `{kv}`")),
        })
        .collect()
}

/// Canonical CoNLL-U text for a document.
pub fn serialize(doc: &Document) -> String {
    doc.sentences.iter().map(Sentence::to_conllu).collect()
}
