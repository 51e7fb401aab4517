use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("site ({row}, {col}) is masked out")]
    MaskedSite { row: usize, col: usize },

    #[error("no valid patch covers site ({row}, {col})")]
    NoValidPatch { row: usize, col: usize },

    #[error("value {value} for feature {feature} outside bounds [{min}, {max}]")]
    OutOfBounds {
        feature: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("degenerate curve set: {0}")]
    DegenerateCurves(String),

    #[error("degenerate clustering: {0}")]
    DegenerateClustering(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
