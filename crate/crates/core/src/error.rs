use std::path::PathBuf;

use thiserror::Error;

/// Every failure the lab can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid distribution spec: {0}")]
    InvalidSpec(String),

    #[error("modulus must be at least 2, got {0}")]
    InvalidModulus(usize),

    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),

    #[error("token id {token} is outside the vocabulary of size {vocab}")]
    OutOfVocabulary { token: usize, vocab: usize },

    #[error("dropout with a positive rate needs an rng stream")]
    MissingRng,

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty input")]
    EmptyInput,

    #[error("non-finite gradient in parameter group `{group}`")]
    PoisonedGradient { group: &'static str },

    #[error("non-finite {quantity} at epoch {epoch}")]
    NonFinite { epoch: usize, quantity: String },

    #[error("non-finite value produced by {0}")]
    NonFiniteResult(&'static str),

    #[error("dropout rate must lie in [0, 1), got {0}")]
    InvalidRate(f64),

    #[error("embedding row {row} has zero norm")]
    DegenerateEmbedding { row: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unknown preset `{name}`; available: {}", available.join(", "))]
    UnknownPreset { name: String, available: Vec<String> },

    #[error("missing input file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
