use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to load {path}: {reason}")]
    Load { path: PathBuf, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("group definition error: {0}")]
    Group(String),

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),

    #[error("unknown variable id {0}")]
    UnknownVariable(usize),

    #[error("assignment is missing a value for variable `{0}`")]
    MissingValue(String),

    #[error("solve result carries no incumbent")]
    NoIncumbent,

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("enumeration bound exceeded: {configurations} configurations > {bound}")]
    EnumerationBound { configurations: u128, bound: u128 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
