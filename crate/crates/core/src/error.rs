use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the plan-then-seam pipeline.
#[derive(Debug, Error)]
pub enum PtsError {
    #[error("empty input table")]
    EmptyTable,
    #[error("empty value for key `{0}`")]
    EmptyValue(String),
    #[error("table too large: {records} records exceeds the limit of {limit}")]
    TableTooLarge { records: usize, limit: usize },
    #[error("vocabulary size {max_size} is smaller than the {reserved} reserved symbols")]
    VocabTooSmall { max_size: usize, reserved: usize },
    #[error("invalid vocabulary file: {0}")]
    InvalidVocab(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerical overflow in {0}")]
    NumericalOverflow(&'static str),
    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("unsupported checkpoint version {found} (this build reads version {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("checkpoint does not match its configuration: {0}")]
    CheckpointMismatch(String),
    #[error("sequence is not a subsequence of the reference: {0}")]
    NotSubsequence(String),
    #[error("invalid plan annotation: {0}")]
    InvalidPlan(String),
    #[error("{path}:{line}: {detail}")]
    Dataset {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = PtsError> = std::result::Result<T, E>;
