//! Random generators for property tests: well-formed trees, documents and
//! dictionaries. Enabled by the `testkit` feature.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::conllu::{AuxRow, Comment, Document, ParseSource, Sentence, Token};
use crate::lexicon::{LexEntry, Sense, Translation};

/// (form, lemma, upos, xpos) tuples, chosen so that the starter rules can fire.
pub const VOCAB: &[(&str, &str, &str, &str)] = &[
    ("ⲛⲉ", "ⲛⲉ", "AUX", "APST"),
    ("ⲛⲉⲣⲉ", "ⲛⲉⲣⲉ", "AUX", "APST"),
    ("ⲛⲁ", "ⲛⲁ", "AUX", "FUT"),
    ("ⲁ", "ⲁ", "AUX", "APST"),
    ("ⲙⲡ", "ⲙⲡⲉ", "AUX", "ANEGPST"),
    ("ϥ", "ⲛⲧⲟϥ", "PRON", "PPERS"),
    ("ⲥ", "ⲛⲧⲟⲥ", "PRON", "PPERS"),
    ("ⲡⲁⲓ", "ⲡⲁⲓ", "PRON", "PDEM"),
    ("ⲙⲙⲟϥ", "ⲙⲙⲟ", "PRON", "PPERO"),
    ("ϫⲱ", "ϫⲱ", "VERB", "V"),
    ("ϫⲟⲟⲥ", "ϫⲱ", "VERB", "V"),
    ("ⲃⲱⲕ", "ⲃⲱⲕ", "VERB", "V"),
    ("ⲱⲛϩ", "ⲱⲛϩ", "VERB", "V"),
    ("ⲡ", "ⲡ", "DET", "ART"),
    ("ⲧ", "ⲡ", "DET", "ART"),
    ("ⲣⲱⲙⲉ", "ⲣⲱⲙⲉ", "NOUN", "N"),
    ("ϩⲁⲗⲟ", "ϩⲁⲗⲟ", "NOUN", "N"),
    ("ⲡⲁⲙⲃⲱ", "ⲡⲁⲙⲃⲱ", "PROPN", "NPROP"),
    ("ϩⲏⲣⲱⲇⲓⲁⲥ", "ϩⲏⲣⲱⲇⲓⲁⲥ", "PROPN", "NPROP"),
    ("ⲛ", "ⲛ", "ADP", "PREP"),
    ("ⲛ", "ⲛ", "ADV", "NEG"),
    ("ⲉⲧ", "ⲉⲧⲉⲣⲉ", "SCONJ", "CREL"),
    ("ⲁⲩⲱ", "ⲁⲩⲱ", "CCONJ", "CONJ"),
    ("ⲇⲉ", "ⲇⲉ", "PART", "PTC"),
    ("ⲁⲛ", "ⲁⲛ", "ADV", "NEG"),
    ("ⲥⲛⲁⲩ", "ⲥⲛⲁⲩ", "NUM", "NUM"),
    (".", ".", "PUNCT", "PUNCT"),
];

pub const DEPRELS: &[&str] = &[
    "nsubj",
    "obj",
    "iobj",
    "obl",
    "aux",
    "aux:pass",
    "case",
    "det",
    "advmod",
    "mark",
    "cc",
    "conj",
    "ccomp",
    "acl:relcl",
    "dislocated",
    "parataxis",
    "nmod",
    "amod",
    "appos",
    "punct",
    "fixed",
    "nsubj:pass",
    "csubj",
];

const FEATS: &[(&str, &[&str])] = &[
    ("Gender", &["Masc", "Fem"]),
    ("Number", &["Sing", "Plur"]),
    ("Person", &["1", "2", "3"]),
    ("Definite", &["Def", "Ind"]),
    ("Polarity", &["Neg"]),
];

fn typical_deprels(upos: &str) -> &'static [&'static str] {
    match upos {
        "AUX" => &["aux"],
        "PRON" => &["nsubj", "obj", "dislocated", "obl"],
        "VERB" => &["ccomp", "acl:relcl", "conj", "parataxis"],
        "NOUN" | "PROPN" => &["nsubj", "obj", "dislocated", "obl", "nmod"],
        "DET" => &["det"],
        "ADP" => &["case"],
        "ADV" => &["advmod"],
        "SCONJ" => &["mark"],
        "CCONJ" => &["cc"],
        "PUNCT" => &["punct"],
        _ => &["advmod", "nummod"],
    }
}

/// A random tree with `1..=max_tokens` tokens. Every token reaches the single
/// root; forms repeat often so duplicate labeling gets exercised.
pub fn random_sentence<R: Rng>(rng: &mut R, max_tokens: usize) -> Sentence {
    let n = rng.gen_range(1..=max_tokens.max(1));
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0usize; n + 1];
    for k in 1..n {
        heads[order[k]] = order[rng.gen_range(0..k)];
    }
    let tokens = (1..=n)
        .map(|id| {
            let (form, lemma, upos, xpos) = VOCAB[rng.gen_range(0..VOCAB.len())];
            let head = heads[id];
            let deprel = if head == 0 {
                "root".to_owned()
            } else if rng.gen_bool(0.7) {
                let typical = typical_deprels(upos);
                typical[rng.gen_range(0..typical.len())].to_owned()
            } else {
                DEPRELS[rng.gen_range(0..DEPRELS.len())].to_owned()
            };
            let mut feats: Vec<(String, String)> = Vec::new();
            for (k, vs) in FEATS {
                if rng.gen_bool(0.2) {
                    feats.push((k.to_string(), vs[rng.gen_range(0..vs.len())].to_string()));
                }
            }
            feats.sort();
            Token {
                id,
                form: form.to_owned(),
                lemma: lemma.to_owned(),
                upos: upos.to_owned(),
                xpos: xpos.to_owned(),
                feats,
                head,
                deprel,
                deps: String::new(),
                misc: if rng.gen_bool(0.2) {
                    "SpaceAfter=No".to_owned()
                } else {
                    String::new()
                },
            }
        })
        .collect();
    Sentence::new(tokens)
}

/// A random sentence with comments, multiword-token ranges and empty nodes.
pub fn random_rich_sentence<R: Rng>(rng: &mut R, max_tokens: usize, index: usize) -> Sentence {
    let mut s = random_sentence(rng, max_tokens);
    let n = s.tokens.len();
    s.comments.push(Comment {
        raw: format!(" sent_id = gen-{index}"),
    });
    s.comments.push(Comment {
        raw: format!(" text = {}", s.source_text()),
    });
    if rng.gen_bool(0.3) {
        s.comments.push(Comment {
            raw: " newdoc".to_owned(),
        });
    }
    if rng.gen_bool(0.2) {
        let after = rng.gen_range(1..=n);
        s.aux_rows.push(AuxRow {
            position: after,
            line: format!("{after}.1\tⲡⲉ\tⲡⲉ\tAUX\tCOP\t_\t_\t_\t{after}:cop\t_"),
        });
    }
    if n >= 2 && rng.gen_bool(0.5) {
        let a = rng.gen_range(1..n);
        let form: String = s.tokens[a - 1].form.clone() + &s.tokens[a].form;
        s.aux_rows.push(AuxRow {
            position: a - 1,
            line: format!("{a}-{}\t{form}\t_\t_\t_\t_\t_\t_\t_\t_", a + 1),
        });
    }
    s.aux_rows.sort_by_key(|a| a.position);
    s.source_id = format!("gen-{index}");
    s
}

pub fn random_document<R: Rng>(rng: &mut R, max_sentences: usize, max_tokens: usize) -> Document {
    let mut doc = Document::new("generated", ParseSource::Automatic);
    for i in 0..rng.gen_range(1..=max_sentences.max(1)) {
        doc.sentences.push(random_rich_sentence(rng, max_tokens, i + 1));
    }
    doc
}

const POS_NAMES: &[&str] = &["Verb", "Noun", "Pronoun", "Preposition", "Conjunction", "Adverb", ""];
const GLOSSES: &[&str] = &["say", "man", "go", "old man", "live", "this", "in", "and", "not", "two"];

/// A dictionary whose headwords are drawn from [`VOCAB`] lemmas and forms.
pub fn random_lexicon<R: Rng>(rng: &mut R, n_entries: usize) -> Vec<LexEntry> {
    (0..n_entries)
        .map(|i| {
            let (form, lemma, _, _) = VOCAB[rng.gen_range(0..VOCAB.len())];
            let headword = if rng.gen_bool(0.2) { form } else { lemma };
            let n_senses = rng.gen_range(1..=14);
            let senses = (0..n_senses)
                .map(|_| Sense {
                    translations: (0..rng.gen_range(1..=3))
                        .map(|_| Translation {
                            language: ["en", "en", "de", "fr"][rng.gen_range(0..4)].to_owned(),
                            gloss: GLOSSES[rng.gen_range(0..GLOSSES.len())].to_owned(),
                        })
                        .collect(),
                    dialect: ["", "S", "S", "B", "Sahidic"][rng.gen_range(0..5)].to_owned(),
                    source: ["CD", "DDGLC"][rng.gen_range(0..2)].to_owned(),
                })
                .collect();
            LexEntry {
                entry_id: format!("E{i}"),
                headword: headword.to_owned(),
                lemma_keys: vec![headword.to_owned()],
                pos: POS_NAMES[rng.gen_range(0..POS_NAMES.len())].to_owned(),
                senses,
            }
        })
        .collect()
}
