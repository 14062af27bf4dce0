//! Bilingual dictionary index and the LEX prompt section.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{Sentence, Token};
use crate::prompt::{SectionKind, SectionText};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Translation {
    pub language: String,
    pub gloss: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sense {
    pub translations: Vec<Translation>,
    /// Dialect tag, empty when the sense is not dialect-specific.
    pub dialect: String,
    /// Sub-lexicon the sense was taken from (e.g. `DDGLC`).
    pub source: String,
}

impl Sense {
    fn is_ddglc(&self) -> bool {
        self.source.eq_ignore_ascii_case("ddglc")
    }

    /// Sahidic or untagged senses.
    pub fn is_sahidic(&self) -> bool {
        let d = self.dialect.trim();
        d.is_empty() || d.eq_ignore_ascii_case("sahidic") || d == "S"
    }

    fn gloss_multiset(&self) -> Vec<(&str, &str)> {
        let mut v: Vec<_> = self
            .translations
            .iter()
            .map(|t| (t.language.as_str(), t.gloss.as_str()))
            .collect();
        v.sort_unstable();
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LexEntry {
    pub entry_id: String,
    pub headword: String,
    pub lemma_keys: Vec<String>,
    pub pos: String,
    pub senses: Vec<Sense>,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("record {record}: {message}")]
    Malformed { record: usize, message: String },
    #[error("record {record}: duplicate entry id `{entry_id}`")]
    DuplicateEntry { record: usize, entry_id: String },
    #[error("missing required column `{0}` in header")]
    MissingColumn(&'static str),
    #[error("xml: {0}")]
    Xml(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LexiconFormat {
    NormalizedTsv,
    TeiXmlSubset,
}

/// Immutable dictionary index. Lookups return entries in ingestion order.
#[derive(Clone, Debug, Default)]
pub struct LexiconIndex {
    entries: Vec<LexEntry>,
    by_lemma: HashMap<String, Vec<usize>>,
    by_form: HashMap<String, Vec<usize>>,
}

impl LexiconIndex {
    pub fn from_entries(entries: Vec<LexEntry>) -> Result<Self, LexiconError> {
        let mut index = LexiconIndex::default();
        let mut seen = HashMap::new();
        for (i, entry) in entries.into_iter().enumerate() {
            if seen.insert(entry.entry_id.clone(), i).is_some() {
                return Err(LexiconError::DuplicateEntry {
                    record: i + 1,
                    entry_id: entry.entry_id,
                });
            }
            if entry.senses.is_empty() {
                return Err(LexiconError::Malformed {
                    record: i + 1,
                    message: format!("entry `{}` has no senses", entry.entry_id),
                });
            }
            let slot = index.entries.len();
            let mut keys: Vec<&str> = vec![entry.headword.as_str()];
            keys.extend(entry.lemma_keys.iter().map(String::as_str));
            let mut added = BTreeSet::new();
            for k in keys {
                if !k.is_empty() && added.insert(k) {
                    index.by_lemma.entry(k.to_owned()).or_default().push(slot);
                }
            }
            index
                .by_form
                .entry(entry.headword.clone())
                .or_default()
                .push(slot);
            index.entries.push(entry);
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LexEntry] {
        &self.entries
    }

    /// Entries reachable under a lemma key or headword, in ingestion order.
    pub fn by_lemma(&self, key: &str) -> Vec<&LexEntry> {
        self.slots(&self.by_lemma, key)
    }

    /// Entries whose headword is exactly `form`.
    pub fn by_form(&self, form: &str) -> Vec<&LexEntry> {
        self.slots(&self.by_form, form)
    }

    fn slots(&self, map: &HashMap<String, Vec<usize>>, key: &str) -> Vec<&LexEntry> {
        map.get(key)
            .map(|v| v.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }
}

/// Read a dictionary in one of the supported formats.
pub fn ingest<R: BufRead>(reader: R, format: LexiconFormat) -> Result<LexiconIndex, LexiconError> {
    let entries = match format {
        LexiconFormat::NormalizedTsv => read_tsv(reader)?,
        LexiconFormat::TeiXmlSubset => {
            let mut text = String::new();
            let mut reader = reader;
            reader.read_to_string(&mut text)?;
            read_tei(&text)?
        }
    };
    LexiconIndex::from_entries(entries)
}

pub const TSV_COLUMNS: [&str; 8] = [
    "entry_id",
    "headword",
    "lemma_keys",
    "pos",
    "dialect",
    "source",
    "language",
    "gloss",
];

/// Normalized TSV: one sense translation per row. An optional `sense`
/// column groups consecutive rows of an entry into one sense; without it
/// every row is its own sense.
fn read_tsv<R: BufRead>(reader: R) -> Result<Vec<LexEntry>, LexiconError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Ok(Vec::new()),
    };
    let header: Vec<String> = header
        .trim_end_matches('\r')
        .split('\t')
        .map(|s| s.trim().to_owned())
        .collect();
    let col = |name: &'static str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or(LexiconError::MissingColumn(name))
    };
    let idx: Vec<usize> = TSV_COLUMNS.iter().map(|c| col(c)).collect::<Result<_, _>>()?;
    let sense_col = header.iter().position(|h| h == "sense");

    let mut entries: Vec<LexEntry> = Vec::new();
    let mut closed: HashMap<String, usize> = HashMap::new();
    let mut last_sense_key: Option<String> = None;

    for (n, line) in lines.enumerate() {
        let record = n + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != header.len() {
            return Err(LexiconError::Malformed {
                record,
                message: format!("expected {} columns, found {}", header.len(), cells.len()),
            });
        }
        let get = |i: usize| cells[idx[i]].trim();
        let (entry_id, headword, language, gloss) = (get(0), get(1), get(6), get(7));
        if entry_id.is_empty() || headword.is_empty() {
            return Err(LexiconError::Malformed {
                record,
                message: "entry_id and headword are required".to_owned(),
            });
        }
        if language.is_empty() || gloss.is_empty() {
            return Err(LexiconError::Malformed {
                record,
                message: "language and gloss are required".to_owned(),
            });
        }
        let translation = Translation {
            language: language.to_owned(),
            gloss: gloss.to_owned(),
        };

        let continuing = entries.last().is_some_and(|e| e.entry_id == entry_id);
        if !continuing {
            if let Some(prev) = entries.last() {
                closed.insert(prev.entry_id.clone(), record);
            }
            if closed.contains_key(entry_id) {
                return Err(LexiconError::DuplicateEntry {
                    record,
                    entry_id: entry_id.to_owned(),
                });
            }
            entries.push(LexEntry {
                entry_id: entry_id.to_owned(),
                headword: headword.to_owned(),
                lemma_keys: get(2)
                    .split('|')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_owned)
                    .collect(),
                pos: get(3).to_owned(),
                senses: Vec::new(),
            });
            last_sense_key = None;
        }
        let entry = entries.last_mut().expect("entry pushed above");
        let sense_key = sense_col.map(|c| cells[c].trim().to_owned());
        let same_sense = continuing && sense_key.is_some() && sense_key == last_sense_key;
        if same_sense {
            entry
                .senses
                .last_mut()
                .expect("sense exists for continuing key")
                .translations
                .push(translation);
        } else {
            entry.senses.push(Sense {
                translations: vec![translation],
                dialect: get(4).to_owned(),
                source: get(5).to_owned(),
            });
        }
        last_sense_key = sense_key;
    }
    Ok(entries)
}

#[derive(Default)]
struct TeiEntry {
    id: Option<String>,
    orths: Vec<String>,
    pos: String,
    dialect: String,
    source: String,
    senses: Vec<Sense>,
}

#[derive(Default)]
struct TeiSense {
    dialect: Option<String>,
    source: Option<String>,
    translations: Vec<Translation>,
}

fn attr(e: &BytesStart<'_>, name: &[u8]) -> Result<Option<String>, LexiconError> {
    for a in e.attributes() {
        let a = a.map_err(|err| LexiconError::Xml(err.to_string()))?;
        let key = a.key.as_ref();
        let local = key.rsplit(|&b| b == b':').next().unwrap_or(key);
        if key == name || local == name {
            let v = a
                .unescape_value()
                .map_err(|err| LexiconError::Xml(err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

/// Minimal TEI dictionary reader: `entry` > `form`/`orth`, `gramGrp`/`pos`,
/// `sense` > `usg[@type=geo]` and `cit[@type=translation]/quote`.
fn read_tei(text: &str) -> Result<Vec<LexEntry>, LexiconError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);

    let mut out = Vec::new();
    let mut entry: Option<TeiEntry> = None;
    let mut sense: Option<TeiSense> = None;
    let mut cit_lang: Option<String> = None;
    let mut capture: Option<&'static str> = None;
    let mut usg_geo = false;
    let mut entry_no = 0usize;

    loop {
        let ev = reader
            .read_event()
            .map_err(|e| LexiconError::Xml(format!("at byte {}: {e}", reader.buffer_position())))?;
        match ev {
            Event::Start(e) => {
                let name = e.local_name().as_ref().to_vec();
                match name.as_slice() {
                    b"entry" => {
                        entry_no += 1;
                        entry = Some(TeiEntry {
                            id: attr(&e, b"id")?,
                            source: attr(&e, b"source")?.unwrap_or_default(),
                            ..TeiEntry::default()
                        });
                    }
                    b"sense" if entry.is_some() => {
                        sense = Some(TeiSense {
                            source: attr(&e, b"source")?,
                            ..TeiSense::default()
                        });
                    }
                    b"cit" => {
                        let is_translation = attr(&e, b"type")?.is_none_or(|t| t == "translation");
                        cit_lang = if is_translation {
                            Some(attr(&e, b"lang")?.unwrap_or_else(|| "en".to_owned()))
                        } else {
                            None
                        };
                    }
                    b"quote" if cit_lang.is_some() => capture = Some("quote"),
                    b"orth" if entry.is_some() => capture = Some("orth"),
                    b"pos" if entry.is_some() => capture = Some("pos"),
                    b"usg" => {
                        usg_geo = attr(&e, b"type")?.as_deref() == Some("geo");
                        if usg_geo {
                            capture = Some("usg");
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                let Some(what) = capture else { continue };
                let value = t
                    .unescape()
                    .map_err(|e| LexiconError::Xml(e.to_string()))?
                    .trim()
                    .to_owned();
                let Some(en) = entry.as_mut() else { continue };
                match what {
                    "orth" => {
                        if !value.is_empty() && !en.orths.contains(&value) {
                            en.orths.push(value);
                        }
                    }
                    "pos" => {
                        if en.pos.is_empty() {
                            en.pos = value;
                        }
                    }
                    "usg" if usg_geo => match sense.as_mut() {
                        Some(s) => s.dialect = Some(value),
                        None => en.dialect = value,
                    },
                    "quote" => {
                        if let (Some(s), Some(lang)) = (sense.as_mut(), cit_lang.as_ref()) {
                            if !value.is_empty() {
                                s.translations.push(Translation {
                                    language: lang.clone(),
                                    gloss: value,
                                });
                            }
                        }
                    }
                    _ => {}
                }
            }
            Event::End(e) => match e.local_name().as_ref() {
                b"sense" => {
                    if let (Some(s), Some(en)) = (sense.take(), entry.as_mut()) {
                        if !s.translations.is_empty() {
                            en.senses.push(Sense {
                                translations: s.translations,
                                dialect: s.dialect.unwrap_or_else(|| en.dialect.clone()),
                                source: s.source.unwrap_or_else(|| en.source.clone()),
                            });
                        }
                    }
                }
                b"entry" => {
                    if let Some(en) = entry.take() {
                        let Some(headword) = en.orths.first().cloned() else {
                            return Err(LexiconError::Malformed {
                                record: entry_no,
                                message: "entry has no orth".to_owned(),
                            });
                        };
                        if !en.senses.is_empty() {
                            out.push(LexEntry {
                                entry_id: en.id.unwrap_or_else(|| format!("tei-{entry_no}")),
                                headword,
                                lemma_keys: en.orths,
                                pos: en.pos,
                                senses: en.senses,
                            });
                        }
                    }
                }
                b"cit" => cit_lang = None,
                b"quote" | b"orth" | b"pos" | b"usg" => {
                    capture = None;
                    usg_geo = false;
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(out)
}

/// Does a dictionary POS label agree with a UPOS tag?
pub fn pos_matches(entry_pos: &str, upos: &str) -> bool {
    if entry_pos.is_empty() || upos.is_empty() {
        return false;
    }
    if entry_pos.eq_ignore_ascii_case(upos) {
        return true;
    }
    let mapped: &[&str] = match entry_pos.to_ascii_lowercase().as_str() {
        "verb" => &["VERB", "AUX"],
        "noun" => &["NOUN"],
        "proper noun" | "name" | "propn" => &["PROPN"],
        "adjective" => &["ADJ"],
        "adverb" => &["ADV"],
        "preposition" => &["ADP"],
        "pronoun" | "personal pronoun" => &["PRON"],
        "article" | "determiner" => &["DET"],
        "numeral" | "number" => &["NUM"],
        "conjunction" => &["CCONJ", "SCONJ"],
        "particle" => &["PART", "ADV"],
        "interjection" => &["INTJ"],
        _ => &[],
    };
    mapped.contains(&upos)
}

/// Dictionary entries retrieved for one token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenHits {
    pub token: Token,
    pub entries: Vec<LexEntry>,
}

/// Retrieve entries per token: exact lemma first, surface form as fallback.
/// Entries whose POS agrees with the token's UPOS come first; order is
/// otherwise ingestion order. Tokens without hits are omitted.
pub fn lookup(sentence: &Sentence, index: &LexiconIndex) -> Vec<TokenHits> {
    sentence
        .tokens
        .iter()
        .filter_map(|tok| {
            let mut found = index.by_lemma(&tok.lemma);
            if found.is_empty() {
                found = index.by_form(&tok.form);
            }
            if found.is_empty() {
                return None;
            }
            // stable sort keeps ingestion order within each group
            found.sort_by_key(|e| !pos_matches(&e.pos, &tok.upos));
            Some(TokenHits {
                token: tok.clone(),
                entries: found.into_iter().cloned().collect(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexParams {
    pub target_languages: BTreeSet<String>,
    pub max_entries_per_sentence: usize,
    pub max_senses_per_entry: usize,
    pub dedup_ddglc: bool,
}

impl Default for LexParams {
    /// English only, 100 entries, 10 senses, no DDGLC deduplication.
    fn default() -> Self {
        LexParams {
            target_languages: BTreeSet::from(["en".to_owned()]),
            max_entries_per_sentence: 100,
            max_senses_per_entry: 10,
            dedup_ddglc: false,
        }
    }
}

impl LexParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_entries_per_sentence == 0 || self.max_senses_per_entry == 0 {
            return Err("lexicon caps must be at least 1".to_owned());
        }
        if self.target_languages.is_empty() {
            return Err("at least one target language is required".to_owned());
        }
        Ok(())
    }
}

fn filter_senses(entry: &LexEntry, params: &LexParams) -> Vec<Sense> {
    let mut senses: Vec<Sense> = entry
        .senses
        .iter()
        .filter(|s| s.is_sahidic())
        .filter_map(|s| {
            let translations: Vec<_> = s
                .translations
                .iter()
                .filter(|t| params.target_languages.contains(&t.language))
                .cloned()
                .collect();
            (!translations.is_empty()).then(|| Sense {
                translations,
                ..s.clone()
            })
        })
        .collect();
    if params.dedup_ddglc {
        let mut seen: Vec<Vec<(String, String)>> = Vec::new();
        senses.retain(|s| {
            if !s.is_ddglc() {
                return true;
            }
            let key: Vec<(String, String)> = s
                .gloss_multiset()
                .into_iter()
                .map(|(a, b)| (a.to_owned(), b.to_owned()))
                .collect();
            if seen.contains(&key) {
                false
            } else {
                seen.push(key);
                true
            }
        });
    }
    senses.truncate(params.max_senses_per_entry);
    senses
}

/// Apply language, dialect, deduplication and cap filters.
///
/// The entry cap counts (token, entry) occurrences across the sentence in
/// sentence order, then rank order.
pub fn filter_entries(hits: &[TokenHits], params: &LexParams) -> Vec<TokenHits> {
    let mut budget = params.max_entries_per_sentence;
    let mut out = Vec::new();
    for hit in hits {
        if budget == 0 {
            break;
        }
        let mut kept = Vec::new();
        for entry in &hit.entries {
            if budget == 0 {
                break;
            }
            let senses = filter_senses(entry, params);
            if senses.is_empty() {
                continue;
            }
            kept.push(LexEntry {
                senses,
                ..entry.clone()
            });
            budget -= 1;
        }
        if !kept.is_empty() {
            out.push(TokenHits {
                token: hit.token.clone(),
                entries: kept,
            });
        }
    }
    out
}

pub fn language_name(code: &str) -> &str {
    match code {
        "en" | "eng" => "English",
        "de" | "deu" | "ger" => "German",
        "fr" | "fra" | "fre" => "French",
        "cop" => "Coptic",
        "el" | "grc" => "Greek",
        "ar" | "ara" => "Arabic",
        other => other,
    }
}

pub const LEX_HEADER_TEMPLATE: &str = "For the translation task, you are given dictionary entries for Coptic. Some words can be polysemous and there might be multiple entries. Each entry can contain multiple senses with translations in {languages}. In such a case, please choose the most appropriate one. Note that for some words, they might be derived from a more basic form, some entries will be for such lemma.\n\nHere are the entries for collected for individual words in the sentence:\n";

pub const LEX_NO_ENTRIES: &str = "No dictionary entries were found for the words in this sentence.";

pub fn lexicon_header(params: &LexParams) -> String {
    let langs: Vec<String> = params
        .target_languages
        .iter()
        .map(|c| format!("'{}'", language_name(c)))
        .collect();
    LEX_HEADER_TEMPLATE.replace("{languages}", &format!("[{}]", langs.join(", ")))
}

fn entry_block(entry: &LexEntry) -> String {
    let n = entry.senses.len();
    let mut out = String::from("Dictionary entry ");
    if !entry.pos.is_empty() {
        out.push_str(&entry.pos);
        out.push(' ');
    }
    out.push_str(&format!(
        "{} has {} {}.",
        entry.headword,
        n,
        if n == 1 { "sense" } else { "senses" }
    ));
    for (i, sense) in entry.senses.iter().enumerate() {
        out.push_str(&format!("\nSense {}:", i + 1));
        let mut langs: Vec<&str> = Vec::new();
        for t in &sense.translations {
            if !langs.contains(&t.language.as_str()) {
                langs.push(&t.language);
            }
        }
        for lang in langs {
            let glosses: Vec<&str> = sense
                .translations
                .iter()
                .filter(|t| t.language == lang)
                .map(|t| t.gloss.as_str())
                .collect();
            out.push_str(&format!(
                "\n- In {}, {} means {}",
                language_name(lang),
                entry.headword,
                glosses.join(", ")
            ));
        }
    }
    out
}

/// Render filtered hits as the LEX section.
pub fn verbalize_lexicon(hits: &[TokenHits], params: &LexParams) -> SectionText {
    let blocks: Vec<String> = hits
        .iter()
        .flat_map(|h| h.entries.iter().map(entry_block))
        .collect();
    let body = if blocks.is_empty() {
        LEX_NO_ENTRIES.to_owned()
    } else {
        blocks.join("\n")
    };
    SectionText {
        kind: SectionKind::Lex,
        header: lexicon_header(params),
        body,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "entry_id\theadword\tlemma_keys\tpos\tdialect\tsource\tlanguage\tgloss\tsense
C8880\teimhti\teimhti\tConjunction\tS\tCD\ten\texcept\t1
C8880\teimhti\teimhti\tConjunction\tS\tCD\ten\tnevertheless\t2
C8880\teimhti\teimhti\tConjunction\tS\tCD\tde\tausser\t1b
C100\td1w\td1w\tVerb\tS\tCD\ten\tsay, speak, tell\t1
C100\td1w\td1w\tVerb\tS\tCD\ten\tsing\t2
C101\td1w\td1w\tNoun\tB\tCD\ten\tsaying\t1
";

    fn index() -> LexiconIndex {
        ingest(FIXTURE.as_bytes(), LexiconFormat::NormalizedTsv).unwrap()
    }

    fn tok(id: usize, form: &str, lemma: &str, upos: &str) -> Token {
        Token {
            id,
            form: form.into(),
            lemma: lemma.into(),
            upos: upos.into(),
            xpos: "_".into(),
            feats: vec![],
            head: if id == 1 { 0 } else { 1 },
            deprel: if id == 1 { "root".into() } else { "dep".into() },
            deps: String::new(),
            misc: String::new(),
        }
    }

    #[test]
    fn empty_stream_gives_empty_index() {
        let idx = ingest("".as_bytes(), LexiconFormat::NormalizedTsv).unwrap();
        assert!(idx.is_empty());
        let idx = ingest(
            "entry_id\theadword\tlemma_keys\tpos\tdialect\tsource\tlanguage\tgloss\n".as_bytes(),
            LexiconFormat::NormalizedTsv,
        )
        .unwrap();
        assert!(idx.is_empty());
    }

    #[test]
    fn senses_grouped_by_sense_column() {
        let idx = index();
        let e = idx.by_lemma("eimhti");
        assert_eq!(e.len(), 1);
        let glosses: Vec<_> = e[0]
            .senses
            .iter()
            .map(|s| s.translations[0].gloss.as_str())
            .collect();
        assert_eq!(glosses, ["except", "nevertheless", "ausser"]);
    }

    #[test]
    fn lookup_returns_senses_in_source_order() {
        let s = Sentence::new(vec![tok(1, "eimhti", "eimhti", "SCONJ")]);
        let hits = filter_entries(&lookup(&s, &index()), &LexParams::default());
        let senses: Vec<_> = hits[0].entries[0]
            .senses
            .iter()
            .map(|s| s.translations[0].gloss.as_str())
            .collect();
        assert_eq!(senses, ["except", "nevertheless"]);
    }

    #[test]
    fn missing_lemmas_yield_nothing() {
        let s = Sentence::new(vec![tok(1, "xyz", "xyz", "NOUN")]);
        assert!(lookup(&s, &index()).is_empty());
    }

    #[test]
    fn form_fallback_and_pos_ranking() {
        let s = Sentence::new(vec![tok(1, "d1w", "unknown", "NOUN")]);
        let hits = lookup(&s, &index());
        let ids: Vec<_> = hits[0].entries.iter().map(|e| e.entry_id.as_str()).collect();
        assert_eq!(ids, ["C101", "C100"]);
    }

    #[test]
    fn malformed_and_duplicate_records() {
        let bad = "entry_id\theadword\tlemma_keys\tpos\tdialect\tsource\tlanguage\tgloss\nA\ta\ta\tN\t\t\ten\n";
        match ingest(bad.as_bytes(), LexiconFormat::NormalizedTsv) {
            Err(LexiconError::Malformed { record: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let dup = "entry_id\theadword\tlemma_keys\tpos\tdialect\tsource\tlanguage\tgloss\nA\ta\ta\tN\t\t\ten\tx\nB\tb\tb\tN\t\t\ten\ty\nA\ta\ta\tN\t\t\ten\tz\n";
        match ingest(dup.as_bytes(), LexiconFormat::NormalizedTsv) {
            Err(LexiconError::DuplicateEntry { record: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let missing = "entry_id\theadword\n";
        assert!(matches!(
            ingest(missing.as_bytes(), LexiconFormat::NormalizedTsv),
            Err(LexiconError::MissingColumn("lemma_keys"))
        ));
    }

    #[test]
    fn dialect_filter_drops_bohairic_senses() {
        let s = Sentence::new(vec![tok(1, "d1w", "d1w", "VERB")]);
        let hits = filter_entries(&lookup(&s, &index()), &LexParams::default());
        let ids: Vec<_> = hits[0].entries.iter().map(|e| e.entry_id.as_str()).collect();
        assert_eq!(ids, ["C100"]);
    }

    #[test]
    fn entry_cap_of_one_keeps_first_entry_of_first_token() {
        let s = Sentence::new(vec![
            tok(1, "d1w", "d1w", "VERB"),
            tok(2, "eimhti", "eimhti", "SCONJ"),
        ]);
        let params = LexParams {
            max_entries_per_sentence: 1,
            ..LexParams::default()
        };
        let hits = filter_entries(&lookup(&s, &index()), &params);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].token.id, 1);
        assert_eq!(hits[0].entries.len(), 1);
        assert_eq!(hits[0].entries[0].entry_id, "C100");
    }

    #[test]
    fn ddglc_duplicates_collapse() {
        let sense = |g: &str| Sense {
            translations: vec![Translation {
                language: "en".into(),
                gloss: g.into(),
            }],
            dialect: String::new(),
            source: "DDGLC".into(),
        };
        let entry = LexEntry {
            entry_id: "G1".into(),
            headword: "logos".into(),
            lemma_keys: vec![],
            pos: "Noun".into(),
            senses: vec![sense("word"), sense("word"), sense("word")],
        };
        let hits = vec![TokenHits {
            token: tok(1, "logos", "logos", "NOUN"),
            entries: vec![entry],
        }];
        let on = LexParams {
            dedup_ddglc: true,
            ..LexParams::default()
        };
        assert_eq!(filter_entries(&hits, &on)[0].entries[0].senses.len(), 1);
        assert_eq!(
            filter_entries(&hits, &LexParams::default())[0].entries[0].senses.len(),
            3
        );
    }

    #[test]
    fn verbalized_entry_shape() {
        let s = Sentence::new(vec![tok(1, "d1w", "d1w", "VERB")]);
        let params = LexParams::default();
        let sec = verbalize_lexicon(&filter_entries(&lookup(&s, &index()), &params), &params);
        assert!(sec.header.contains("Some words can be polysemous"));
        assert!(sec.header.contains("translations in ['English']."));
        assert_eq!(
            sec.body,
            "Dictionary entry Verb d1w has 2 senses.\nSense 1:\n- In English, d1w means say, speak, tell\nSense 2:\n- In English, d1w means sing"
        );
    }

    #[test]
    fn no_hits_gives_fixed_line() {
        let sec = verbalize_lexicon(&[], &LexParams::default());
        assert_eq!(sec.body, LEX_NO_ENTRIES);
    }

    #[test]
    fn tei_subset() {
        let xml = r#"<TEI><text><body>
<entry xml:id="C8880">
  <form type="lemma"><orth>eimhti</orth></form>
  <gramGrp><pos>Conjunction</pos></gramGrp>
  <sense xml:id="s1"><usg type="geo">S</usg>
    <cit type="translation" xml:lang="en"><quote>except (for), if not</quote></cit>
    <cit type="translation" xml:lang="de"><quote>außer</quote></cit>
  </sense>
  <sense xml:id="s2" source="DDGLC"><cit type="translation" xml:lang="en"><quote>but</quote></cit></sense>
  <sense><cit type="example"><quote>not a gloss</quote></cit></sense>
</entry>
</body></text></TEI>"#;
        let idx = ingest(xml.as_bytes(), LexiconFormat::TeiXmlSubset).unwrap();
        let e = &idx.entries()[0];
        assert_eq!(e.entry_id, "C8880");
        assert_eq!(e.pos, "Conjunction");
        assert_eq!(e.senses.len(), 2);
        assert_eq!(e.senses[0].dialect, "S");
        assert_eq!(e.senses[0].translations.len(), 2);
        assert_eq!(e.senses[1].source, "DDGLC");
    }
}
