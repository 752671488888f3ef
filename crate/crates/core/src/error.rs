use std::path::PathBuf;

use thiserror::Error;

use crate::backends::BackendError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: invalid span {start_ms}..{end_ms} (end before start)")]
    InvalidSpan { line: usize, start_ms: u64, end_ms: u64 },

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error("corpus is empty: {0}")]
    EmptyCorpus(String),

    #[error("missing baseline scores for idx {0:?}")]
    MissingScores(Vec<u32>),

    #[error("{0}")]
    Invalid(String),

    #[error("artifact {path} was produced by a different configuration (expected {expected}, found {found}); re-run `{stage}`")]
    StaleArtifact {
        path: PathBuf,
        stage: String,
        expected: String,
        found: String,
    },

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl AsRef<std::path::Path>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            message: message.into(),
        }
    }
}
