use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no events")]
    NoEvents,

    #[error("malformed input: {bad} of {total} rows unparseable; sample: {sample}")]
    MalformedInput {
        bad: usize,
        total: usize,
        sample: String,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input")]
    EmptyInput,

    #[error("duplicate label {label:?} at line {line}")]
    DuplicateLabel { label: String, line: usize },

    #[error("no periods covered: {0}")]
    NoPeriods(String),

    #[error("unknown node {0:?}")]
    UnknownNode(String),

    #[error("node registries of the two networks differ")]
    RegistryMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("stationary iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("zero variance")]
    ZeroVariance,

    #[error("rank-deficient design matrix (pivot {pivot:e} below tolerance)")]
    RankDeficient { pivot: f64 },

    #[error("too few aligned pairs: {0} (need at least 3)")]
    TooFewPairs(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
