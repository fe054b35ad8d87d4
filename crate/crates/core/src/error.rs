use std::path::PathBuf;

use thiserror::Error;

use crate::panel::WeightVector;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("non-finite or malformed numeric input: {0}")]
    NumericInput(String),

    /// The solver hit its iteration cap before the duality gap closed.
    #[error("solver did not converge after {iterations} iterations (duality gap {gap:.3e})")]
    Convergence {
        best: Box<WeightVector>,
        gap: f64,
        iterations: usize,
    },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: u64,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("cell `{cell}`: {failed} of {attempted} replications failed (first: {cause})")]
    Harness {
        cell: String,
        failed: usize,
        attempted: usize,
        cause: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidSpec(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 for bad input, 3 for numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidSpec(_) | Error::Parse { .. } | Error::Config(_) | Error::Io { .. } => 2,
            Error::NumericInput(_) | Error::Convergence { .. } | Error::Harness { .. } => 3,
        }
    }
}
