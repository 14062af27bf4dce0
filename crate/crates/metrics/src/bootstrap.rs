//! Paired bootstrap test on per-sentence scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::MetricError;

pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// mean(a) - mean(b)
    pub mean_diff: f64,
    pub p_value: f64,
    pub resamples: usize,
    pub seed: u64,
}

/// Two-sided test of "mean difference is zero". Resamples the paired
/// differences after shifting them to mean zero and counts how often the
/// resampled mean is at least as extreme as the observed one;
/// p = (count + 1) / (resamples + 1).
///
/// Differences are sorted before resampling, so the result does not depend
/// on the order in which the pairs are given.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<BootstrapResult, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch {
            hypotheses: a.len(),
            references: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    diffs.sort_by(f64::total_cmp);
    let n = diffs.len();
    let observed = diffs.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = diffs.iter().map(|d| d - observed).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..resamples {
        let mut s = 0.0;
        for _ in 0..n {
            s += centered[rng.gen_range(0..n)];
        }
        if (s / n as f64).abs() >= observed.abs() {
            extreme += 1;
        }
    }
    Ok(BootstrapResult {
        mean_diff: observed,
        p_value: (extreme + 1) as f64 / (resamples + 1) as f64,
        resamples,
        seed,
    })
}
