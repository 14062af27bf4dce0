//! Experiment orchestration: corpora and resources in, translation records,
//! grid-search rankings and report tables out.

pub mod config;
pub mod corpus;
pub mod grid;
pub mod record;
pub mod report;
pub mod run;
pub mod session;
pub mod subset;

use std::path::PathBuf;

use thiserror::Error;

use udprompt_core::conllu::ConlluError;
use udprompt_core::construction::ConstructionError;
use udprompt_core::dep::DepError;
use udprompt_core::lexicon::LexiconError;
use udprompt_core::pipeline::PipelineError;
use udprompt_core::prompt::PromptError;
use udprompt_gateway::GatewayError;
use udprompt_metrics::MetricError;

pub use config::RunnerConfig;
pub use corpus::{Corpus, Split};
pub use grid::{grid_search, lex_grid, GridComponent, GridOutcome, RankedPoint};
pub use record::{Manifest, RunOutput, SentenceScores, TranslationRecord};
pub use report::{build_report, Report};
pub use run::{run, RunSpec};
pub use subset::{select_diagnostic_subset, DiagnosticSubset};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Conllu(#[from] ConlluError),
    #[error("lexicon: {0}")]
    Lexicon(#[from] LexiconError),
    #[error("rule pack: {0}")]
    Construction(#[from] ConstructionError),
    #[error("relation glosses: {0}")]
    Dep(#[from] DepError),
    #[error("templates: {0}")]
    Prompt(#[from] PromptError),
    #[error("{path}: line {line}: {message}")]
    References { path: PathBuf, line: usize, message: String },
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("sentence {sentence}: {source}")]
    Pipeline { sentence: String, source: PipelineError },
    #[error("model `{0}` is not defined in the config")]
    UnknownModel(String),
    #[error("split `{0}` is not defined in the config")]
    UnknownSplit(Split),
    #[error("no gold parses supplied for the {0} split")]
    MissingGold(Split),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("diagnostic subset needs at least {required} scored sentences, got {available}")]
    SubsetTooSmall { available: usize, required: usize },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("{path}: refusing to overwrite a different existing record file")]
    RecordConflict { path: PathBuf },
    #[error("{path}: line {line}: {message}")]
    BadRecord { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Report(String),
}

pub type Result<T, E = RunnerError> = std::result::Result<T, E>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| RunnerError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
