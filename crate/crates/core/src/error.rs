use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("projection must have full row rank: rank {rank} < {rows} rows")]
    RankDeficientProjection { rank: usize, rows: usize },

    #[error("dynamics must be invertible: {0}")]
    NonInvertibleDynamics(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures caused by malformed or inconsistent input, as
    /// opposed to a breakdown inside the numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::NumericalFailure(_))
    }

    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
