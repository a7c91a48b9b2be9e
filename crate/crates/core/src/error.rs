use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, OrisError>;

#[derive(Debug, Error)]
pub enum OrisError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: unknown class label(s): {}", .offending.iter().map(|(l, name)| format!("line {l} {name:?}")).collect::<Vec<_>>().join(", "))]
    UnknownLabels {
        path: PathBuf,
        offending: Vec<(usize, String)>,
    },

    #[error("{0}: empty input")]
    Empty(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("cached activations are stale: network was updated after the forward pass")]
    StaleCache,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
}

impl OrisError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        OrisError::Io {
            path: path.into(),
            source,
        }
    }
}
