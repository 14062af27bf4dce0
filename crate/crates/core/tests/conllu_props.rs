use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use udprompt_core::conllu::{parse_document, serialize, validate, ParseSource};
use udprompt_core::testkit::random_document;

const FIG6: &str = "1\tm\tn\tADP\tPREP\t_\t3\tcase\t_\t_
2\tp\tp\tDET\tART\t_\t3\tdet\t_\t_
3\th1agioc\th1agios\tNOUN\tN\t_\t0\troot\t_\t_
4\tbiktwr\tbiktwr\tPROPN\tNPROP\t_\t3\tappos\t_\t_
5\tpe\tp\tDET\tART\t_\t6\tdet\t_\t_
6\tcrathlathc\tctrathlathc\tNOUN\tN\t_\t3\tappos\t_\t_
7\tauw\tauw\tCCONJ\tCONJ\t_\t9\tcc\t_\t_
8\tp\tp\tDET\tART\t_\t9\tdet\t_\t_
9\tmarturoc\tmarturoc\tNOUN\tN\t_\t6\tconj\t_\t_
10\tet\tetere\tSCONJ\tCREL\t_\t11\tmark\t_\t_
11\ttaihu\ttaeio\tVERB\tVSTAT\t_\t9\tacl:relcl\t_\t_

";

#[test]
fn fixture_fields() {
    let doc = parse_document(FIG6, "fig", ParseSource::Gold).unwrap();
    let s = &doc.sentences[0];
    let expect = [
        (1, "m", "n", "ADP", "PREP", 3, "case"),
        (2, "p", "p", "DET", "ART", 3, "det"),
        (3, "h1agioc", "h1agios", "NOUN", "N", 0, "root"),
        (4, "biktwr", "biktwr", "PROPN", "NPROP", 3, "appos"),
        (5, "pe", "p", "DET", "ART", 6, "det"),
        (6, "crathlathc", "ctrathlathc", "NOUN", "N", 3, "appos"),
        (7, "auw", "auw", "CCONJ", "CONJ", 9, "cc"),
        (8, "p", "p", "DET", "ART", 9, "det"),
        (9, "marturoc", "marturoc", "NOUN", "N", 6, "conj"),
        (10, "et", "etere", "SCONJ", "CREL", 11, "mark"),
        (11, "taihu", "taeio", "VERB", "VSTAT", 9, "acl:relcl"),
    ];
    assert_eq!(s.tokens.len(), expect.len());
    for (t, e) in s.tokens.iter().zip(expect) {
        assert_eq!(
            (t.id, t.form.as_str(), t.lemma.as_str(), t.upos.as_str(), t.xpos.as_str(), t.head, t.deprel.as_str()),
            e
        );
        assert!(t.feats.is_empty());
        assert!(t.deps.is_empty() && t.misc.is_empty());
    }
    assert_eq!(s.root().unwrap().form, "h1agioc");
    assert_eq!(doc.parse_source, ParseSource::Gold);
    assert_eq!(serialize(&doc), FIG6);
}

#[test]
fn five_hundred_generated_documents_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    for i in 0..500 {
        let doc = random_document(&mut rng, 4, 15);
        let text = serialize(&doc);
        let parsed = parse_document(&text, "generated", ParseSource::Automatic)
            .unwrap_or_else(|e| panic!("document {i} rejected: {e}\n{text}"));
        assert_eq!(serialize(&parsed), text, "document {i}");
        assert_eq!(parsed.sentences, doc.sentences, "document {i}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn round_trip_any_seed(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let doc = random_document(&mut rng, 3, 15);
        for s in &doc.sentences {
            prop_assert!(validate(s).is_empty());
        }
        let text = serialize(&doc);
        let parsed = parse_document(&text, "generated", ParseSource::Automatic).unwrap();
        prop_assert_eq!(serialize(&parsed), text);
    }
}

#[derive(Clone, Copy, Debug)]
enum Mutation {
    DropColumn,
    NonIntegerHead,
    SelfHead,
    HeadOutOfRange,
    MalformedFeats,
    BumpId,
    DetachRoot,
}

const MUTATIONS: [Mutation; 7] = [
    Mutation::DropColumn,
    Mutation::NonIntegerHead,
    Mutation::SelfHead,
    Mutation::HeadOutOfRange,
    Mutation::MalformedFeats,
    Mutation::BumpId,
    Mutation::DetachRoot,
];

/// Every single-row corruption of a valid document is rejected; row-local
/// corruptions are reported on the corrupted line.
#[test]
fn mutation_harness() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for round in 0..300 {
        let doc = random_document(&mut rng, 3, 12);
        let text = serialize(&doc);
        let mut lines: Vec<String> = text.split('\n').map(str::to_owned).collect();
        let token_lines: Vec<usize> = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| {
                let id = l.split('\t').next().unwrap_or("");
                !id.is_empty() && id.bytes().all(|b| b.is_ascii_digit())
            })
            .map(|(i, _)| i)
            .collect();
        let mutation = MUTATIONS[round % MUTATIONS.len()];
        let target = match mutation {
            Mutation::DetachRoot => *token_lines
                .iter()
                .find(|&&i| lines[i].split('\t').nth(6) == Some("0"))
                .unwrap(),
            _ => token_lines[rng.gen_range(0..token_lines.len())],
        };
        let mut cols: Vec<String> = lines[target].split('\t').map(str::to_owned).collect();
        let id: usize = cols[0].parse().unwrap();
        match mutation {
            Mutation::DropColumn => {
                cols.pop();
            }
            Mutation::NonIntegerHead => cols[6] = "x".into(),
            Mutation::SelfHead => {
                cols[6] = id.to_string();
            }
            Mutation::HeadOutOfRange => cols[6] = "99".into(),
            Mutation::MalformedFeats => cols[5] = "Gender".into(),
            Mutation::BumpId => cols[0] = (id + 50).to_string(),
            Mutation::DetachRoot => {
                // Root now hangs from another token (or itself): no root remains.
                cols[6] = if id == 1 { "2".into() } else { "1".into() };
                cols[7] = "dep".into();
            }
        }
        lines[target] = cols.join("\t");
        let corrupted = lines.join("\n");
        let err = parse_document(&corrupted, "mut", ParseSource::Automatic)
            .expect_err(&format!("{mutation:?} accepted:\n{corrupted}"));
        assert!(!err.errors.is_empty());
        if matches!(
            mutation,
            Mutation::DropColumn | Mutation::NonIntegerHead | Mutation::SelfHead | Mutation::HeadOutOfRange | Mutation::MalformedFeats
        ) {
            assert!(
                err.errors.iter().any(|e| e.line == target + 1),
                "{mutation:?} on line {} not reported: {err}",
                target + 1
            );
        }
    }
}
