use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = UmlError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum UmlError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure at epoch {epoch}: {term} is {value}")]
    Numerical {
        epoch: usize,
        term: String,
        value: f64,
    },

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl UmlError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        UmlError::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        UmlError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        UmlError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            UmlError::InvalidInput(_) | UmlError::Config(_) => 1,
            UmlError::Numerical { .. } => 2,
            UmlError::Checkpoint { .. } | UmlError::Io { .. } | UmlError::Csv(_) | UmlError::Json(_) => 3,
        }
    }
}
