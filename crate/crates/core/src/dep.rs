//! Plain-English verbalization of dependency relations (the DEP section).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::Sentence;
use crate::prompt::{SectionKind, SectionText, DEP_HEADER};

pub const DEFAULT_GLOSS_TABLE: &str = include_str!("../data/relation_glosses.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DuplicateMode {
    /// `form_1`, `form_2`, ...
    Subscript,
    /// `the first form`, `the second form`, ...
    Nominalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTier {
    Content,
    Participants,
    All,
}

impl PosTier {
    pub const TIERS: [PosTier; 3] = [PosTier::Content, PosTier::Participants, PosTier::All];
}

macro_rules! str_enum {
    ($ty:ty { $($variant:path => $name:literal),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),* })
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s { $($name => Ok($variant),)* other => Err(format!("unknown value `{other}`")) }
            }
        }
    };
}

str_enum!(DuplicateMode { DuplicateMode::Subscript => "subscript", DuplicateMode::Nominalized => "nominalized" });
str_enum!(PosTier { PosTier::Content => "content", PosTier::Participants => "participants", PosTier::All => "all" });

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DepParams {
    pub duplicate_mode: DuplicateMode,
    pub collapse_relations: bool,
    pub pos_tier: PosTier,
}

impl Default for DepParams {
    /// Subscripts, full relation labels, participants tier.
    fn default() -> Self {
        DepParams {
            duplicate_mode: DuplicateMode::Subscript,
            collapse_relations: false,
            pos_tier: PosTier::Participants,
        }
    }
}

impl DepParams {
    /// Every combination of the three parameters (2 × 2 × 3).
    pub fn grid() -> Vec<DepParams> {
        let mut out = Vec::new();
        for duplicate_mode in [DuplicateMode::Subscript, DuplicateMode::Nominalized] {
            for collapse_relations in [false, true] {
                for pos_tier in PosTier::TIERS {
                    out.push(DepParams {
                        duplicate_mode,
                        collapse_relations,
                        pos_tier,
                    });
                }
            }
        }
        out
    }
}

impl fmt::Display for DepParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dup={},collapse={},tier={}",
            self.duplicate_mode, self.collapse_relations, self.pos_tier
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DepError {
    #[error("unknown relation label `{0}`")]
    UnknownRelation(String),
    #[error("gloss table line {line}: {message}")]
    Table { line: usize, message: String },
}

/// Relation label to English phrase, full and collapsed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationGlossTable {
    full: HashMap<String, String>,
    collapsed: HashMap<String, String>,
}

impl RelationGlossTable {
    /// Parse a `deprel<TAB>full_gloss<TAB>collapsed_gloss` file with header.
    pub fn parse(text: &str) -> Result<Self, DepError> {
        let mut full = HashMap::new();
        let mut collapsed = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if i == 0 || line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 || cols.iter().any(|c| c.trim().is_empty()) {
                return Err(DepError::Table {
                    line: i + 1,
                    message: "expected three nonempty columns".to_owned(),
                });
            }
            if full.contains_key(cols[0]) {
                return Err(DepError::Table {
                    line: i + 1,
                    message: format!("duplicate relation `{}`", cols[0]),
                });
            }
            full.insert(cols[0].to_owned(), cols[1].to_owned());
            collapsed.insert(cols[0].to_owned(), cols[2].to_owned());
        }
        Ok(RelationGlossTable { full, collapsed })
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.full.keys().map(String::as_str).collect()
    }
}

impl Default for RelationGlossTable {
    fn default() -> Self {
        RelationGlossTable::parse(DEFAULT_GLOSS_TABLE).expect("bundled gloss table is valid")
    }
}

/// English phrase for a relation. Subtyped labels missing from the table
/// fall back to their base relation.
pub fn relation_gloss<'t>(
    deprel: &str,
    collapse: bool,
    table: &'t RelationGlossTable,
) -> Result<&'t str, DepError> {
    let map = if collapse { &table.collapsed } else { &table.full };
    map.get(deprel)
        .or_else(|| deprel.split_once(':').and_then(|(base, _)| map.get(base)))
        .map(String::as_str)
        .ok_or_else(|| DepError::UnknownRelation(deprel.to_owned()))
}

/// UPOS tags verbalized at each tier. PUNCT, SYM and X are never included.
pub fn pos_tier_members(tier: PosTier) -> BTreeSet<&'static str> {
    const CONTENT: [&str; 5] = ["NOUN", "VERB", "PROPN", "ADP", "ADV"];
    const PARTICIPANTS: [&str; 4] = ["PRON", "AUX", "DET", "NUM"];
    const CONJUNCTIONS: [&str; 2] = ["CCONJ", "SCONJ"];
    let mut set: BTreeSet<&'static str> = CONTENT.into_iter().collect();
    if tier >= PosTier::Participants {
        set.extend(PARTICIPANTS);
    }
    if tier >= PosTier::All {
        set.extend(CONJUNCTIONS);
    }
    set
}

pub fn ordinal(n: usize) -> String {
    const WORDS: [&str; 20] = [
        "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth",
        "tenth", "eleventh", "twelfth", "thirteenth", "fourteenth", "fifteenth", "sixteenth",
        "seventeenth", "eighteenth", "nineteenth", "twentieth",
    ];
    if (1..=WORDS.len()).contains(&n) {
        return WORDS[n - 1].to_owned();
    }
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

/// Display label per token id (index `id - 1`). Repeated forms are
/// numbered in surface order.
pub fn assign_occurrence_labels(sentence: &Sentence, mode: DuplicateMode) -> Vec<String> {
    let mut totals: HashMap<&str, usize> = HashMap::new();
    for t in &sentence.tokens {
        *totals.entry(t.form.as_str()).or_default() += 1;
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    sentence
        .tokens
        .iter()
        .map(|t| {
            let form = t.form.as_str();
            if totals[form] == 1 {
                return form.to_owned();
            }
            let k = seen.entry(form).or_default();
            *k += 1;
            match mode {
                DuplicateMode::Subscript => format!("{form}_{k}"),
                DuplicateMode::Nominalized => format!("the {} {form}", ordinal(*k)),
            }
        })
        .collect()
}

/// One statement per retained token, in surface order.
pub fn dependency_statements(
    sentence: &Sentence,
    params: &DepParams,
    table: &RelationGlossTable,
) -> Result<Vec<String>, DepError> {
    let labels = assign_occurrence_labels(sentence, params.duplicate_mode);
    let tier = pos_tier_members(params.pos_tier);
    let mut out = Vec::new();
    for (i, tok) in sentence.tokens.iter().enumerate() {
        if tok.is_root() {
            out.push(format!("{} is the root.", labels[i]));
            continue;
        }
        let Some(head) = sentence.token(tok.head) else {
            continue;
        };
        if !tier.contains(tok.upos.as_str()) || !tier.contains(head.upos.as_str()) {
            continue;
        }
        let gloss = relation_gloss(&tok.deprel, params.collapse_relations, table)?;
        out.push(format!(
            "{} is the {} of {}.",
            labels[i],
            gloss,
            labels[tok.head - 1]
        ));
    }
    Ok(out)
}

/// The DEP section: header, then the statements joined by single spaces.
pub fn verbalize_dependencies(
    sentence: &Sentence,
    params: &DepParams,
    table: &RelationGlossTable,
) -> Result<SectionText, DepError> {
    let statements = dependency_statements(sentence, params, table)?;
    Ok(SectionText {
        kind: SectionKind::Dep,
        header: DEP_HEADER.to_owned(),
        body: statements.join(" "),
    })
}
