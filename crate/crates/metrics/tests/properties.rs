use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use udprompt_metrics::bleu::{bleu, BleuConfig};
use udprompt_metrics::bootstrap::paired_bootstrap;
use udprompt_metrics::chrf::chrf;
use udprompt_metrics::meteor::{align, meteor_lite, meteor_lite_sentence, stats};
use udprompt_metrics::tokenize::tokenize_13a;

/// Words with shared stems so both matching stages get exercised.
const WORDS: &[&str] = &[
    "walk", "walks", "walked", "walking", "monk", "monks", "the", "a", "desert", "house", "houses", "say", "said", "go",
    "went", "God", "holy", "man", "men", "and", "not", "Herodias", ",", ".", "?", "\"", "3.5", "10-12", "don't",
];

#[test]
fn tokenizer_is_not_idempotent_like_the_reference() {
    // outputs of sacrebleu 2.5.1 Tokenizer13a on ",.0" and on its own output
    assert_eq!(tokenize_13a(",.0"), [",", ".0"]);
    assert_eq!(tokenize_13a(", .0"), [",", ".", "0"]);
}

fn sentence(rng: &mut ChaCha8Rng, max: usize) -> String {
    let n = rng.gen_range(0..=max);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn corpus(seed: u64, n: usize) -> (Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (sentence(&mut rng, 12), sentence(&mut rng, 12))).unzip()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// 13a only inserts spaces (entity unescaping, `<skipped>` removal and `-\n` joining aside,
    /// hence no `&`, `<` or newline in the alphabet). It is not idempotent: the
    /// reference scorer itself splits `, .0` further than `,.0`.
    #[test]
    fn tokenizer_only_inserts_whitespace(s in "[ a-zA-Z0-9.,;:!?'\"()>\\-/\\[\\]{}~`@#$%^*+=_|\\\\ⲁⲃϩ\u{a0}\t]{0,40}") {
        let tokens = tokenize_13a(&s);
        prop_assert!(tokens.iter().all(|t| !t.is_empty() && !t.contains(char::is_whitespace)));
        let squeeze = |x: &str| x.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        prop_assert_eq!(squeeze(&tokens.concat()), squeeze(&s));
    }

    #[test]
    fn corpus_metrics_ignore_segment_order(seed in any::<u64>()) {
        let (h, r) = corpus(seed, 15);
        let mut idx: Vec<usize> = (0..h.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let hp: Vec<&String> = idx.iter().map(|&i| &h[i]).collect();
        let rp: Vec<&String> = idx.iter().map(|&i| &r[i]).collect();
        let hp: Vec<&str> = hp.iter().map(|s| s.as_str()).collect();
        let rp: Vec<&str> = rp.iter().map(|s| s.as_str()).collect();
        for cfg in [BleuConfig::DEFAULT, BleuConfig::RELAXED] {
            prop_assert_eq!(bleu(&h, &r, &cfg).unwrap().score, bleu(&hp, &rp, &cfg).unwrap().score);
        }
        prop_assert_eq!(chrf(&h, &r, 2).unwrap().score, chrf(&hp, &rp, 2).unwrap().score);
        prop_assert_eq!(meteor_lite(&h, &r).unwrap(), meteor_lite(&hp, &rp).unwrap());
    }

    /// Replacing every hypothesis with its reference reaches the maximum.
    #[test]
    fn perfect_hypotheses_maximize(seed in any::<u64>()) {
        let (h, r) = corpus(seed, 10);
        if r.iter().all(|s| !s.trim().is_empty()) {
            for cfg in [BleuConfig::DEFAULT, BleuConfig::RELAXED] {
                let best = bleu(&r, &r, &cfg).unwrap().score;
                prop_assert!(bleu(&h, &r, &cfg).unwrap().score <= best);
            }
            prop_assert_eq!(chrf(&r, &r, 2).unwrap().score, 100.0);
            prop_assert!(chrf(&h, &r, 2).unwrap().score <= 100.0);
            prop_assert_eq!(meteor_lite(&r, &r).unwrap(), 1.0);
        }
    }

    /// Inserting a copy of an unmatched reference token anywhere in the
    /// hypothesis never lowers the segment score.
    #[test]
    fn meteor_lite_monotone_in_matches(seed in any::<u64>(), hyp_max in 1usize..40, ref_max in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hyp = tokenize_13a(&sentence(&mut rng, hyp_max).to_lowercase());
        let rf = tokenize_13a(&sentence(&mut rng, ref_max).to_lowercase());
        let a = align(&hyp, &rf);
        let free: Vec<usize> = (0..rf.len()).filter(|j| !a.iter().any(|p| p.1 == *j)).collect();
        if let Some(&j) = free.choose(&mut rng) {
            let mut longer = hyp.clone();
            longer.insert(rng.gen_range(0..=hyp.len()), rf[j].clone());
            let before = stats(&hyp, &rf).score();
            let after = stats(&longer, &rf).score();
            prop_assert!(after >= before - 1e-12, "{:?} -> {:?} vs {:?}: {} > {}", hyp, longer, rf, before, after);
        }
    }

    #[test]
    fn bootstrap_ignores_pair_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
        let mut idx: Vec<usize> = (0..50).collect();
        idx.shuffle(&mut rng);
        let ap: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
        let bp: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
        prop_assert_eq!(paired_bootstrap(&a, &b, 500, 3).unwrap(), paired_bootstrap(&ap, &bp, 500, 3).unwrap());
    }
}

#[test]
fn empty_hypotheses_score_zero() {
    let h = ["", "", ""];
    let r = ["The monk went.", "a b c d", "x"];
    assert_eq!(bleu(&h, &r, &BleuConfig::DEFAULT).unwrap().score, 0.0);
    assert_eq!(bleu(&h, &r, &BleuConfig::RELAXED).unwrap().score, 0.0);
    assert_eq!(chrf(&h, &r, 2).unwrap().score, 0.0);
    assert_eq!(meteor_lite(&h, &r).unwrap(), 0.0);
    assert_eq!(meteor_lite_sentence("", "x"), 0.0);
}

#[test]
fn disjoint_vocabulary_meteor_zero() {
    assert_eq!(meteor_lite(&["alpha beta gamma"], &["delta epsilon"]).unwrap(), 0.0);
}

#[test]
fn bootstrap_expectations() {
    let mut rng = ChaCha8Rng::seed_from_u64(380);
    let a: Vec<f64> = (0..380).map(|_| rng.gen_range(0.6..0.95)).collect();
    let same = paired_bootstrap(&a, &a, 10_000, 42).unwrap();
    assert!(same.p_value > 0.9, "{same:?}");
    let shifted: Vec<f64> = a.iter().map(|x| x + 0.1).collect();
    let r = paired_bootstrap(&shifted, &a, 10_000, 42).unwrap();
    assert!(r.p_value < 0.001, "{r:?}");
    assert!((r.mean_diff - 0.1).abs() < 1e-9);
    // deterministic given the seed
    assert_eq!(r, paired_bootstrap(&shifted, &a, 10_000, 42).unwrap());
    assert!(paired_bootstrap(&a, &a[1..], 10, 1).is_err());
}

/// A noisy difference of known size: the test should find a clear effect
/// significant and a tiny one not.
#[test]
fn bootstrap_separates_effect_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base: Vec<f64> = (0..380).map(|_| rng.gen_range(0.5..1.0)).collect();
    let noisy = |shift: f64, rng: &mut ChaCha8Rng| -> Vec<f64> { base.iter().map(|x| x + shift + rng.gen_range(-0.1..0.1)).collect() };
    let big = noisy(0.05, &mut rng);
    let none = noisy(0.0, &mut rng);
    assert!(paired_bootstrap(&big, &base, 2000, 1).unwrap().p_value < 0.01);
    assert!(paired_bootstrap(&none, &base, 2000, 1).unwrap().p_value > 0.01);
}

/// Maximum bipartite matching by augmenting paths over exact-or-stem edges.
fn max_matching(hyp: &[String], rf: &[String]) -> usize {
    use rust_stemmers::{Algorithm, Stemmer};
    let st = Stemmer::create(Algorithm::English);
    let hs: Vec<String> = hyp.iter().map(|w| st.stem(w).into_owned()).collect();
    let rs: Vec<String> = rf.iter().map(|w| st.stem(w).into_owned()).collect();
    fn augment(i: usize, hs: &[String], rs: &[String], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for j in 0..rs.len() {
            if rs[j] == hs[i] && !seen[j] {
                seen[j] = true;
                if owner[j].is_none() || augment(owner[j].unwrap(), hs, rs, seen, owner) {
                    owner[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; rf.len()];
    (0..hyp.len()).filter(|&i| augment(i, &hs, &rs, &mut vec![false; rf.len()], &mut owner)).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn meteor_matches_equal_maximum_matching(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hyp = tokenize_13a(&sentence(&mut rng, 20).to_lowercase());
        let rf = tokenize_13a(&sentence(&mut rng, 20).to_lowercase());
        let s = stats(&hyp, &rf);
        prop_assert_eq!(s.matches(), max_matching(&hyp, &rf));
        prop_assert_eq!(align(&hyp, &rf).len(), s.matches());
    }

    /// With no repeated tokens the alignment is unique, and the bigram-based
    /// chunk count equals the chunks read off that alignment.
    #[test]
    fn meteor_chunks_exact_without_repeats(seed in any::<u64>(), n in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pool: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
        let rf: Vec<String> = pool.choose_multiple(&mut rng, n).cloned().collect();
        let extra = rng.gen_range(0..4);
        let hyp: Vec<String> = pool.choose_multiple(&mut rng, n + extra).cloned().collect();
        let pairs = align(&hyp, &rf);
        let mut chunks = 0;
        let mut prev: Option<(usize, usize)> = None;
        for &(h, r) in &pairs {
            if !matches!(prev, Some((ph, pr)) if h == ph + 1 && r == pr + 1) {
                chunks += 1;
            }
            prev = Some((h, r));
        }
        prop_assert_eq!(stats(&hyp, &rf).chunks(), chunks);
    }
}
