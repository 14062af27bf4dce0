//! chrF / chrF++: character n-gram F-score, optionally with word n-grams.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::tokenize::{is_py_space, py_split};
use crate::{check_lengths, MetricError, REFERENCE_SCORER_VERSION};

pub const CHAR_ORDER: usize = 6;
pub const BETA: f64 = 2.0;

const PUNCTS: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChrfScore {
    pub score: f64,
    pub char_order: usize,
    pub word_order: usize,
    pub signature: String,
}

pub fn chrf_signature(word_order: usize) -> String {
    format!("nrefs:1|case:mixed|eff:yes|nc:{CHAR_ORDER}|nw:{word_order}|space:no|version:{REFERENCE_SCORER_VERSION}")
}

/// Splits one leading or one trailing punctuation mark off each word
/// (trailing wins); single-character words are kept whole.
fn words(line: &str) -> Vec<&str> {
    let is_punct = |c: char| PUNCTS.contains(c);
    let mut out = Vec::new();
    for w in py_split(line) {
        let first = w.chars().next().unwrap();
        let last = w.chars().next_back().unwrap();
        if w.chars().nth(1).is_none() {
            out.push(w);
        } else if is_punct(last) {
            out.push(&w[..w.len() - last.len_utf8()]);
            out.push(&w[w.len() - last.len_utf8()..]);
        } else if is_punct(first) {
            out.push(&w[..first.len_utf8()]);
            out.push(&w[first.len_utf8()..]);
        } else {
            out.push(w);
        }
    }
    out
}

fn counts<T: Eq + Hash>(items: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut m = HashMap::new();
    for w in items.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

/// [hyp, ref, match] for one order.
fn order_stats<T: Eq + Hash>(hyp: &[T], rf: &[T], n: usize) -> [u64; 3] {
    let h = counts(hyp, n);
    let r = counts(rf, n);
    let n_ref: u64 = r.values().sum();
    let n_hyp: u64 = if r.is_empty() { 0 } else { h.values().sum() };
    let n_match = h.iter().map(|(g, c)| r.get(g).map_or(0, |rc| (*c).min(*rc))).sum();
    [n_hyp, n_ref, n_match]
}

/// Flattened [hyp, ref, match] triples: character orders 1..=6, then word
/// orders 1..=word_order.
pub fn segment_stats(hypothesis: &str, reference: &str, word_order: usize) -> Vec<u64> {
    let hc: Vec<char> = hypothesis.chars().filter(|&c| !is_py_space(c)).collect();
    let rc: Vec<char> = reference.chars().filter(|&c| !is_py_space(c)).collect();
    let mut out = Vec::with_capacity(3 * (CHAR_ORDER + word_order));
    for n in 1..=CHAR_ORDER {
        out.extend(order_stats(&hc, &rc, n));
    }
    let hw = words(hypothesis);
    let rw = words(reference);
    for n in 1..=word_order {
        out.extend(order_stats(&hw, &rw, n));
    }
    out
}

pub fn score_from_stats(stats: &[u64]) -> f64 {
    let factor = BETA * BETA;
    let (mut avg_prec, mut avg_rec, mut effective) = (0.0f64, 0.0f64, 0usize);
    for t in stats.chunks(3) {
        let (n_hyp, n_ref, n_match) = (t[0], t[1], t[2]);
        if n_hyp > 0 && n_ref > 0 {
            avg_prec += n_match as f64 / n_hyp as f64;
            avg_rec += n_match as f64 / n_ref as f64;
            effective += 1;
        }
    }
    if effective == 0 {
        return 0.0;
    }
    avg_prec /= effective as f64;
    avg_rec /= effective as f64;
    if avg_prec + avg_rec == 0.0 {
        return 0.0;
    }
    100.0 * (1.0 + factor) * avg_prec * avg_rec / (factor * avg_prec + avg_rec)
}

/// Corpus chrF (`word_order = 0`) or chrF++ (`word_order = 2`). Statistics
/// are summed over segments before the F-score is taken.
pub fn chrf<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R], word_order: usize) -> Result<ChrfScore, MetricError> {
    check_lengths(hypotheses.len(), references.len())?;
    let mut total = vec![0u64; 3 * (CHAR_ORDER + word_order)];
    for (h, r) in hypotheses.iter().zip(references) {
        for (acc, v) in total.iter_mut().zip(segment_stats(h.as_ref(), r.as_ref(), word_order)) {
            *acc += v;
        }
    }
    Ok(ChrfScore {
        score: score_from_stats(&total),
        char_order: CHAR_ORDER,
        word_order,
        signature: chrf_signature(word_order),
    })
}

pub fn sentence_chrf(hypothesis: &str, reference: &str, word_order: usize) -> f64 {
    score_from_stats(&segment_stats(hypothesis, reference, word_order))
}
