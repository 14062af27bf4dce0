//! Corpus and sentence BLEU with the two presets used for reporting.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tokenize::{py_rstrip, py_split, tokenize_13a_string};
use crate::{check_lengths, MetricError, REFERENCE_SCORER_VERSION};

/// Stand-in for log(0), as in the reference implementation.
const LOG_ZERO: f64 = -9_999_999_999.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    Floor(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    ThirteenA,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_ngram: usize,
    pub effective_order: bool,
    pub smoothing: Smoothing,
    pub tokenizer: Tokenizer,
    pub case: Case,
}

impl BleuConfig {
    /// 4-gram, no effective order, no smoothing.
    pub const DEFAULT: BleuConfig = BleuConfig {
        max_ngram: 4,
        effective_order: false,
        smoothing: Smoothing::None,
        tokenizer: Tokenizer::ThirteenA,
        case: Case::Mixed,
    };

    /// 3-gram, effective order, floor smoothing at 0.1. Keeps short
    /// segments from collapsing to zero.
    pub const RELAXED: BleuConfig = BleuConfig {
        max_ngram: 3,
        effective_order: true,
        smoothing: Smoothing::Floor(0.1),
        tokenizer: Tokenizer::ThirteenA,
        case: Case::Mixed,
    };

    /// The reference scorer's signature string. The n-gram order is not part
    /// of it, exactly as upstream.
    pub fn signature(&self, nrefs: usize) -> String {
        let smooth = match self.smoothing {
            Smoothing::None => "none".to_owned(),
            Smoothing::Floor(v) => format!("floor[{v:.2}]"),
        };
        format!(
            "nrefs:{nrefs}|case:mixed|eff:{}|tok:13a|smooth:{smooth}|version:{REFERENCE_SCORER_VERSION}",
            if self.effective_order { "yes" } else { "no" }
        )
    }
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub score: f64,
    pub counts: Vec<u64>,
    pub totals: Vec<u64>,
    pub precisions: Vec<f64>,
    pub bp: f64,
    pub sys_len: u64,
    pub ref_len: u64,
    pub signature: String,
}

impl fmt::Display for BleuScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BLEU = {:.2} ({})", self.score, self.signature)
    }
}

/// Sufficient statistics of one segment (or a sum of segments).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub sys_len: u64,
    pub ref_len: u64,
    pub counts: Vec<u64>,
    pub totals: Vec<u64>,
}

impl BleuStats {
    fn add(&mut self, other: &BleuStats) {
        self.sys_len += other.sys_len;
        self.ref_len += other.ref_len;
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
            self.totals.resize(other.totals.len(), 0);
        }
        for (i, (c, t)) in other.counts.iter().zip(&other.totals).enumerate() {
            self.counts[i] += c;
            self.totals[i] += t;
        }
    }
}

fn ngram_counts<'a>(tokens: &'a [&'a str], max_n: usize) -> HashMap<&'a [&'a str], u64> {
    let mut m = HashMap::new();
    for n in 1..=max_n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

pub fn segment_stats(hypothesis: &str, reference: &str, max_ngram: usize) -> BleuStats {
    let hyp = tokenize_13a_string(py_rstrip(hypothesis));
    let rf = tokenize_13a_string(py_rstrip(reference));
    let hyp: Vec<&str> = py_split(&hyp).collect();
    let rf: Vec<&str> = py_split(&rf).collect();
    let ref_ngrams = ngram_counts(&rf, max_ngram);
    let mut counts = vec![0u64; max_ngram];
    let mut totals = vec![0u64; max_ngram];
    for (gram, c) in ngram_counts(&hyp, max_ngram) {
        let n = gram.len() - 1;
        totals[n] += c;
        if let Some(r) = ref_ngrams.get(gram) {
            counts[n] += c.min(*r);
        }
    }
    BleuStats {
        sys_len: hyp.len() as u64,
        ref_len: rf.len() as u64,
        counts,
        totals,
    }
}

/// Score from sufficient statistics. Precisions are kept as fractions and
/// scaled once at the end, so a perfect match is exactly 100.
pub fn score_from_stats(stats: &BleuStats, cfg: &BleuConfig, nrefs: usize) -> BleuScore {
    let k = cfg.max_ngram;
    let mut precisions = vec![0.0f64; k];
    let sys = stats.sys_len as f64;
    let rf = stats.ref_len as f64;
    let bp = if stats.sys_len < stats.ref_len {
        if stats.sys_len > 0 {
            (1.0 - rf / sys).exp()
        } else {
            0.0
        }
    } else {
        1.0
    };
    let mut out = BleuScore {
        score: 0.0,
        counts: stats.counts.clone(),
        totals: stats.totals.clone(),
        precisions: vec![0.0; k],
        bp,
        sys_len: stats.sys_len,
        ref_len: stats.ref_len,
        signature: cfg.signature(nrefs),
    };
    if stats.counts.iter().all(|&c| c == 0) {
        return out;
    }
    let mut eff_order = k;
    for n in 1..=k {
        let total = stats.totals[n - 1];
        if total == 0 {
            break;
        }
        if cfg.effective_order {
            eff_order = n;
        }
        let correct = stats.counts[n - 1];
        if correct == 0 {
            if let Smoothing::Floor(v) = cfg.smoothing {
                precisions[n - 1] = v / total as f64;
            }
        } else {
            precisions[n - 1] = correct as f64 / total as f64;
        }
    }
    let log_sum: f64 = precisions[..eff_order]
        .iter()
        .map(|&p| if p == 0.0 { LOG_ZERO } else { p.ln() })
        .sum();
    out.score = 100.0 * bp * (log_sum / eff_order as f64).exp();
    out.precisions = precisions.iter().map(|p| 100.0 * p).collect();
    out
}

/// Corpus BLEU against a single reference per segment.
pub fn bleu<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R], cfg: &BleuConfig) -> Result<BleuScore, MetricError> {
    check_lengths(hypotheses.len(), references.len())?;
    let mut total = BleuStats {
        counts: vec![0; cfg.max_ngram],
        totals: vec![0; cfg.max_ngram],
        ..BleuStats::default()
    };
    for (h, r) in hypotheses.iter().zip(references) {
        total.add(&segment_stats(h.as_ref(), r.as_ref(), cfg.max_ngram));
    }
    Ok(score_from_stats(&total, cfg, 1))
}

pub fn sentence_bleu(hypothesis: &str, reference: &str, cfg: &BleuConfig) -> BleuScore {
    score_from_stats(&segment_stats(hypothesis, reference, cfg.max_ngram), cfg, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signatures() {
        assert_eq!(
            BleuConfig::DEFAULT.signature(1),
            "nrefs:1|case:mixed|eff:no|tok:13a|smooth:none|version:2.5.1"
        );
        assert_eq!(
            BleuConfig::RELAXED.signature(1),
            "nrefs:1|case:mixed|eff:yes|tok:13a|smooth:floor[0.10]|version:2.5.1"
        );
    }

    #[test]
    fn empty_and_mismatch() {
        assert_eq!(bleu(&[""], &["a b c"], &BleuConfig::DEFAULT).unwrap().score, 0.0);
        assert_eq!(sentence_bleu("", "a b c", &BleuConfig::RELAXED).score, 0.0);
        assert!(matches!(
            bleu(&["a"], &["a", "b"], &BleuConfig::DEFAULT),
            Err(MetricError::LengthMismatch { .. })
        ));
        assert!(matches!(bleu::<&str, &str>(&[], &[], &BleuConfig::DEFAULT), Err(MetricError::EmptyCorpus)));
    }

    #[test]
    fn perfect_match_is_exactly_100() {
        let s = ["the cat sat on the mat .", "a dog"];
        assert_eq!(bleu(&s, &s, &BleuConfig::DEFAULT).unwrap().score, 100.0);
        assert_eq!(bleu(&s, &s, &BleuConfig::RELAXED).unwrap().score, 100.0);
    }
}
