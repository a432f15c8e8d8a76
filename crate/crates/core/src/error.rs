use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the extraction and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or undecodable image {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    Dimension { width: usize, height: usize, min: usize },

    #[error("hidden weight row {row} is constant for Q={q}, p={p}")]
    DegenerateWeights { q: usize, p: usize, row: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("within-class covariance is singular; increase the regularization")]
    SingularCovariance,

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad caller-supplied parameters rather
    /// than by the data being processed.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Parameter(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
