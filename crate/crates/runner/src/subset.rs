//! Diagnostic subset: the `k` best and `k` worst baseline sentences.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::record::TranslationRecord;
use crate::{Result, RunnerError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticSubset {
    /// Highest F1 first.
    pub easiest: Vec<String>,
    /// Continues the same order: the lowest F1 comes last.
    pub hardest: Vec<String>,
}

impl DiagnosticSubset {
    pub fn ids(&self) -> Vec<String> {
        self.easiest.iter().chain(&self.hardest).cloned().collect()
    }
}

/// Compares ids with digit runs taken as numbers, so `dev-2 < dev-10`.
/// Falls back to plain byte order when the natural comparison ties
/// (`dev-01` vs `dev-1`).
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..i]));
                start = i;
            }
        }
        out
    }
    if a.is_empty() || b.is_empty() {
        return a.cmp(b);
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for ((da, xa), (db, xb)) in ca.iter().zip(&cb) {
        let ord = if *da && *db {
            let (ta, tb) = (xa.trim_start_matches('0'), xb.trim_start_matches('0'));
            ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb))
        } else {
            xa.cmp(xb)
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}

/// Orders all sentences by F1 descending, ties by ascending id, and takes
/// the first `k` and the last `k`. Using one total order keeps the two
/// halves disjoint even when every score ties.
pub fn select_diagnostic_subset(scores: &[(String, f64)], k: usize) -> Result<DiagnosticSubset> {
    if scores.len() < 2 * k {
        return Err(RunnerError::SubsetTooSmall {
            available: scores.len(),
            required: 2 * k,
        });
    }
    let mut order: Vec<&(String, f64)> = scores.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| compare_ids(&a.0, &b.0)));
    Ok(DiagnosticSubset {
        easiest: order[..k].iter().map(|s| s.0.clone()).collect(),
        hardest: order[order.len() - k..].iter().map(|s| s.0.clone()).collect(),
    })
}

/// `(sentence id, BERTScore F1)` pairs of a run.
pub fn f1_scores(records: &[TranslationRecord]) -> Vec<(String, f64)> {
    records.iter().map(|r| (r.sentence_id.clone(), r.scores.bertscore_f1)).collect()
}
