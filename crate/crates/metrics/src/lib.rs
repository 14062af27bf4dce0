//! Machine-translation metrics: BLEU (two presets), chrF++, `meteor_lite`,
//! BERTScore delegation to an external sidecar, and a paired bootstrap test.
//!
//! BLEU and chrF++ reproduce sacreBLEU's behaviour, including its
//! signature strings.

pub mod bertscore;
pub mod bleu;
pub mod bootstrap;
pub mod chrf;
pub mod meteor;
pub mod report;
pub mod tokenize;

use thiserror::Error;

pub use bleu::{bleu, sentence_bleu, BleuConfig, BleuScore, Smoothing};
pub use bootstrap::{paired_bootstrap, BootstrapResult};
pub use chrf::{chrf, ChrfScore};
pub use meteor::meteor_lite;
pub use report::{score_report, ScoreReport};
pub use tokenize::tokenize_13a;

/// sacreBLEU release whose semantics are reproduced; appears in signatures.
pub const REFERENCE_SCORER_VERSION: &str = "2.5.1";

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("no segments to score")]
    EmptyCorpus,
    #[error(transparent)]
    Sidecar(#[from] bertscore::SidecarError),
}

pub(crate) fn check_lengths(hypotheses: usize, references: usize) -> Result<(), MetricError> {
    if hypotheses != references {
        return Err(MetricError::LengthMismatch { hypotheses, references });
    }
    if hypotheses == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(())
}
