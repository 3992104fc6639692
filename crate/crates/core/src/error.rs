use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DmlError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular diffusion coefficient at state {state}")]
    SingularDiffusion { state: f64 },

    #[error("quadrature did not converge: {0}")]
    Oracle(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, DmlError>;

impl DmlError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DmlError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        DmlError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
