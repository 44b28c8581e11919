use std::path::PathBuf;

use crate::lp::LpError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite parameter")]
    NonFiniteParameter,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("kernel scale must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("evaluation of candidate {index} failed: {source}")]
    Evaluation {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("planner LP is unbounded at hour {hour}; the lookahead model is malformed")]
    UnboundedPlan { hour: usize },

    #[error("trace file {path}: {message}")]
    TraceLoad { path: PathBuf, message: String },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("io error on {path}: {source}")]
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
