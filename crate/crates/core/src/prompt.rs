//! Prompt sections, experimental settings and final prompt assembly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::Sentence;

/// The four augmentation components, in prompt order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SectionKind {
    #[serde(rename = "LEX")]
    Lex,
    #[serde(rename = "CONLL")]
    Conll,
    #[serde(rename = "DEP")]
    Dep,
    #[serde(rename = "CON")]
    Con,
}

impl SectionKind {
    pub const ALL: [SectionKind; 4] = [
        SectionKind::Lex,
        SectionKind::Conll,
        SectionKind::Dep,
        SectionKind::Con,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::Lex => "LEX",
            SectionKind::Conll => "CONLL",
            SectionKind::Dep => "DEP",
            SectionKind::Con => "CON",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const CONLL_HEADER: &str = "The raw conllu data for the sentence is in the CONLL-U format:";
pub const DEP_HEADER: &str = "The dependency information for the sentence is:";
pub const CON_HEADER: &str = "The information about specific constructions in the sentence is:";
/// Leading words of the LEX header, which is parameterized by language.
pub const LEX_HEADER_PREFIX: &str = "For the translation task, you are given dictionary entries";

/// Marker strings whose presence reveals each component in a prompt.
pub fn header_marker(kind: SectionKind) -> &'static str {
    match kind {
        SectionKind::Lex => LEX_HEADER_PREFIX,
        SectionKind::Conll => CONLL_HEADER,
        SectionKind::Dep => DEP_HEADER,
        SectionKind::Con => CON_HEADER,
    }
}

/// One labeled block of the instruction. An empty body means the section
/// does not participate and is dropped together with its header.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionText {
    pub kind: SectionKind,
    pub header: String,
    pub body: String,
}

impl SectionText {
    pub fn empty(kind: SectionKind) -> Self {
        SectionText {
            kind,
            header: String::new(),
            body: String::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    pub fn render(&self) -> String {
        format!("{}\n{}", self.header, self.body)
    }
}

/// Which components a prompt includes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Setting(u8);

impl Setting {
    pub const BASELINE: Setting = Setting(0);

    pub fn from_kinds(kinds: impl IntoIterator<Item = SectionKind>) -> Self {
        Setting(kinds.into_iter().fold(0, |acc, k| acc | k.bit()))
    }

    pub fn all() -> Self {
        Setting::from_kinds(SectionKind::ALL)
    }

    /// The seven settings of the main experiment matrix.
    pub fn matrix() -> Vec<Setting> {
        use SectionKind::*;
        vec![
            Setting::BASELINE,
            Setting::from_kinds([Lex]),
            Setting::from_kinds([Conll]),
            Setting::from_kinds([Con]),
            Setting::from_kinds([Dep]),
            Setting::from_kinds([Dep, Con]),
            Setting::all(),
        ]
    }

    pub fn contains(self, kind: SectionKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn is_baseline(self) -> bool {
        self.0 == 0
    }

    pub fn kinds(self) -> Vec<SectionKind> {
        SectionKind::ALL
            .into_iter()
            .filter(|k| self.contains(*k))
            .collect()
    }

    pub fn name(self) -> String {
        if self.is_baseline() {
            "baseline".to_owned()
        } else if self == Setting::all() {
            "ALL".to_owned()
        } else if self == Setting::from_kinds([SectionKind::Dep, SectionKind::Con]) {
            "DEP+CON".to_owned()
        } else {
            self.kinds()
                .iter()
                .map(|k| k.as_str())
                .collect::<Vec<_>>()
                .join("+")
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl fmt::Debug for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Setting({})", self.name())
    }
}

impl FromStr for Setting {
    type Err = String;

    /// Accepts `baseline`, `ALL`, and any `+`-joined combination of
    /// `LEX`, `CONLL`, `DEP`, `CON`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("baseline") {
            return Ok(Setting::BASELINE);
        }
        if s.eq_ignore_ascii_case("all") {
            return Ok(Setting::all());
        }
        let mut kinds = Vec::new();
        for part in s.split('+') {
            let k = match part.trim().to_ascii_uppercase().as_str() {
                "LEX" => SectionKind::Lex,
                "CONLL" => SectionKind::Conll,
                "DEP" => SectionKind::Dep,
                "CON" => SectionKind::Con,
                _ => return Err(format!("unknown setting `{s}`")),
            };
            if kinds.contains(&k) {
                return Err(format!("component {k} repeated in `{s}`"));
            }
            kinds.push(k);
        }
        Ok(Setting::from_kinds(kinds))
    }
}

impl Serialize for Setting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_BASE_TEMPLATE: &str = include_str!("../data/base_instruction.txt");
pub const DEFAULT_CLOSING_TEMPLATE: &str = include_str!("../data/closing_cue.txt");
pub const SOURCE_PLACEHOLDER: &str = "{source}";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("template must contain exactly one {{source}} placeholder, found {0}")]
    Placeholder(usize),
    #[error("section {kind} is not part of setting {setting}")]
    KindNotInSetting { kind: SectionKind, setting: Setting },
    #[error("section {0} supplied twice")]
    DuplicateSection(SectionKind),
}

/// Base instruction and closing cue, each with one `{source}` placeholder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Templates {
    base: String,
    closing: String,
}

impl Templates {
    pub fn new(base: &str, closing: &str) -> Result<Self, PromptError> {
        for t in [base, closing] {
            let n = t.matches(SOURCE_PLACEHOLDER).count();
            if n != 1 {
                return Err(PromptError::Placeholder(n));
            }
        }
        // Template files conventionally end with a newline that is not
        // part of the instruction.
        Ok(Templates {
            base: base.trim_end_matches(['\n', '\r']).to_owned(),
            closing: closing.trim_end_matches(['\n', '\r']).to_owned(),
        })
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn closing(&self) -> &str {
        &self.closing
    }
}

impl Default for Templates {
    fn default() -> Self {
        Templates::new(DEFAULT_BASE_TEMPLATE, DEFAULT_CLOSING_TEMPLATE)
            .expect("bundled templates are valid")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub setting: Setting,
    pub source_sentence: String,
    pub token_estimate: usize,
}

/// Coarse token count: one token per four bytes, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

/// The raw CoNLL-U rows of a sentence as a prompt section.
pub fn conllu_section(sentence: &Sentence, include_comments: bool) -> SectionText {
    let mut lines: Vec<String> = Vec::new();
    if include_comments {
        lines.extend(sentence.comments.iter().map(|c| format!("#{}", c.raw)));
    }
    lines.extend(sentence.rows());
    SectionText {
        kind: SectionKind::Conll,
        header: CONLL_HEADER.to_owned(),
        body: lines.join("\n"),
    }
}

/// Compose base instruction, participating sections and closing cue.
///
/// Section order is fixed (LEX, CONLL, DEP, CON) regardless of the order of
/// `sections`. The baseline prompt is the base instruction alone.
pub fn assemble(
    source: &str,
    sections: &[SectionText],
    setting: Setting,
    templates: &Templates,
) -> Result<Prompt, PromptError> {
    let mut slots: [Option<&SectionText>; 4] = [None; 4];
    for s in sections {
        if !setting.contains(s.kind) {
            return Err(PromptError::KindNotInSetting {
                kind: s.kind,
                setting,
            });
        }
        let slot = &mut slots[s.kind as usize];
        if slot.is_some() {
            return Err(PromptError::DuplicateSection(s.kind));
        }
        *slot = Some(s);
    }

    let mut blocks = vec![templates.base.replace(SOURCE_PLACEHOLDER, source)];
    if !setting.is_baseline() {
        blocks.extend(
            slots
                .iter()
                .flatten()
                .filter(|s| !s.is_empty())
                .map(|s| s.render()),
        );
        blocks.push(templates.closing.replace(SOURCE_PLACEHOLDER, source));
    }
    let text = blocks.join("\n");
    Ok(Prompt {
        token_estimate: estimate_tokens(&text),
        text,
        setting,
        source_sentence: source.to_owned(),
    })
}
