//! `meteor_lite`: a METEOR-style unigram score with exact and stemmed
//! matching only. There is no synonym stage, so numbers are not comparable
//! to full METEOR.
//!
//! Matching is done per stem class, exact forms first: the matched count is
//! the clipped count of shared stems, i.e. the size of a maximum
//! exact-then-stemmed unigram alignment. Fragmentation is counted without
//! committing to one alignment: every matched (clipped) stem bigram glues
//! two matches together, so `chunks = matches - matched bigrams` (at
//! least 1). A single chunk costs nothing; each further chunk removes
//! [`BREAK_COST`] of a match from the recall numerator.
//!
//! With this definition, adding a hypothesis token that has an unmatched
//! counterpart in the reference adds one match and destroys at most one
//! matched bigram, so neither precision nor penalized recall can fall.

use std::collections::HashMap;

use rust_stemmers::{Algorithm, Stemmer};

use crate::tokenize::tokenize_13a;
use crate::{check_lengths, MetricError};

/// METEOR's parameterized harmonic mean weight; 0.9 leans on recall.
pub const ALPHA: f64 = 0.9;
/// Matches lost per chunk break.
pub const BREAK_COST: f64 = 0.5;

pub const METEOR_LITE_NOTE: &str = "meteor_lite: exact + stemmed unigram matching, no synonym stage; not comparable to full METEOR";

/// Lowercased 13a tokens.
pub fn normalize(text: &str) -> Vec<String> {
    tokenize_13a(&text.to_lowercase())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeteorStats {
    pub hyp_len: usize,
    pub ref_len: usize,
    pub exact: usize,
    pub stemmed: usize,
    pub matched_bigrams: usize,
}

impl MeteorStats {
    pub fn matches(&self) -> usize {
        self.exact + self.stemmed
    }

    pub fn chunks(&self) -> usize {
        if self.matches() == 0 {
            0
        } else {
            self.matches().saturating_sub(self.matched_bigrams).max(1)
        }
    }

    pub fn score(&self) -> f64 {
        let m = self.matches();
        if m == 0 {
            return 0.0;
        }
        let effective = m as f64 - BREAK_COST * (self.chunks() - 1) as f64;
        let p = m as f64 / self.hyp_len as f64;
        let r = effective / self.ref_len as f64;
        p * r / (ALPHA * p + (1.0 - ALPHA) * r)
    }
}

fn stems(tokens: &[String]) -> Vec<String> {
    let stemmer = Stemmer::create(Algorithm::English);
    tokens.iter().map(|w| stemmer.stem(w).into_owned()).collect()
}

fn counts<T: std::hash::Hash + Eq>(items: impl Iterator<Item = T>) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for x in items {
        *m.entry(x).or_insert(0) += 1;
    }
    m
}

fn clipped<T: std::hash::Hash + Eq>(h: &HashMap<T, usize>, r: &HashMap<T, usize>) -> usize {
    h.iter().map(|(k, c)| (*c).min(r.get(k).copied().unwrap_or(0))).sum()
}

pub fn stats(hyp: &[String], rf: &[String]) -> MeteorStats {
    let exact = clipped(&counts(hyp.iter()), &counts(rf.iter()));
    let (hs, rs) = (stems(hyp), stems(rf));
    let total = clipped(&counts(hs.iter()), &counts(rs.iter()));
    let matched_bigrams = clipped(&counts(hs.windows(2)), &counts(rs.windows(2)));
    MeteorStats {
        hyp_len: hyp.len(),
        ref_len: rf.len(),
        exact,
        stemmed: total - exact,
        matched_bigrams,
    }
}

/// One maximum alignment, for inspection: each hypothesis token, in order,
/// takes the first free reference token with the same form; leftovers then
/// do the same by stem. Pairs are (hypothesis index, reference index).
pub fn align(hyp: &[String], rf: &[String]) -> Vec<(usize, usize)> {
    let mut ref_used = vec![false; rf.len()];
    let mut hyp_to_ref: Vec<Option<usize>> = vec![None; hyp.len()];
    for (i, h) in hyp.iter().enumerate() {
        if let Some(j) = (0..rf.len()).find(|&j| !ref_used[j] && &rf[j] == h) {
            ref_used[j] = true;
            hyp_to_ref[i] = Some(j);
        }
    }
    let (hs, rs) = (stems(hyp), stems(rf));
    for i in 0..hyp.len() {
        if hyp_to_ref[i].is_some() {
            continue;
        }
        if let Some(j) = (0..rf.len()).find(|&j| !ref_used[j] && rs[j] == hs[i]) {
            ref_used[j] = true;
            hyp_to_ref[i] = Some(j);
        }
    }
    hyp_to_ref.iter().enumerate().filter_map(|(i, j)| j.map(|j| (i, j))).collect()
}

/// Segment score in [0, 1].
pub fn meteor_lite_sentence(hypothesis: &str, reference: &str) -> f64 {
    stats(&normalize(hypothesis), &normalize(reference)).score()
}

/// Mean of segment scores.
pub fn meteor_lite<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R]) -> Result<f64, MetricError> {
    check_lengths(hypotheses.len(), references.len())?;
    let mut scores: Vec<f64> = hypotheses
        .iter()
        .zip(references)
        .map(|(h, r)| meteor_lite_sentence(h.as_ref(), r.as_ref()))
        .collect();
    // order-independent summation
    scores.sort_by(f64::total_cmp);
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
