use serde::{Deserialize, Serialize};

use crate::bertscore::BertScores;
use crate::bleu::{bleu, sentence_bleu, BleuConfig};
use crate::chrf::chrf;
use crate::meteor::{meteor_lite, METEOR_LITE_NOTE};
use crate::MetricError;

/// Every metric for one system output, with signatures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub segments: usize,
    pub empty_hypotheses: usize,
    pub bleu: f64,
    pub bleu_signature: String,
    pub bleu_relaxed: f64,
    pub bleu_relaxed_signature: String,
    pub chrf_pp: f64,
    pub chrf_signature: String,
    pub meteor_lite: f64,
    pub meteor_note: String,
    pub bertscore_model: Option<String>,
    pub bertscore_rescaled: Option<bool>,
    pub bertscore_f1_mean: Option<f64>,
    pub bertscore_f1: Option<Vec<f64>>,
    /// Sentence BLEU under the relaxed preset only; the default preset
    /// zeroes too many short segments to be informative.
    pub sentence_bleu_relaxed: Vec<f64>,
}

pub fn score_report<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R], bert: Option<&BertScores>) -> Result<ScoreReport, MetricError> {
    let default = bleu(hypotheses, references, &BleuConfig::DEFAULT)?;
    let relaxed = bleu(hypotheses, references, &BleuConfig::RELAXED)?;
    let cf = chrf(hypotheses, references, 2)?;
    if let Some(b) = bert {
        if b.f1.len() != hypotheses.len() {
            return Err(MetricError::LengthMismatch {
                hypotheses: hypotheses.len(),
                references: b.f1.len(),
            });
        }
    }
    Ok(ScoreReport {
        segments: hypotheses.len(),
        empty_hypotheses: hypotheses.iter().filter(|h| h.as_ref().trim().is_empty()).count(),
        bleu: default.score,
        bleu_signature: default.signature,
        bleu_relaxed: relaxed.score,
        bleu_relaxed_signature: relaxed.signature,
        chrf_pp: cf.score,
        chrf_signature: cf.signature,
        meteor_lite: meteor_lite(hypotheses, references)?,
        meteor_note: METEOR_LITE_NOTE.to_owned(),
        bertscore_model: bert.map(|b| b.model.model_id.clone()),
        bertscore_rescaled: bert.map(|b| b.model.rescale_with_baseline),
        bertscore_f1_mean: bert.map(|b| b.mean_f1),
        bertscore_f1: bert.map(|b| b.f1.clone()),
        sentence_bleu_relaxed: hypotheses
            .iter()
            .zip(references)
            .map(|(h, r)| sentence_bleu(h.as_ref(), r.as_ref(), &BleuConfig::RELAXED).score)
            .collect(),
    })
}
