use std::path::PathBuf;

use cci_core::{BackendError, CacheError, DatasetError, MetricsError, PromptError, ScoreError};
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_PARTIAL: u8 = 3;
pub const EXIT_FAILED: u8 = 4;

/// How a command that processes many items ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some items failed; their error records are in the output.
    Partial,
    /// Every item failed.
    Failed,
}

impl Outcome {
    pub fn from_counts(ok: usize, failed: usize) -> Self {
        match (ok, failed) {
            (_, 0) => Self::Success,
            (0, _) => Self::Failed,
            _ => Self::Partial,
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Self::Success => EXIT_OK,
            Self::Partial => EXIT_PARTIAL,
            Self::Failed => EXIT_FAILED,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Dataset { path: PathBuf, source: DatasetError },
    #[error("{path}:{line}: {message}")]
    BadRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("no label for scored item {0:?}")]
    MissingLabel(String),
    #[error("no prediction for scored item {0:?}")]
    MissingPrediction(String),
    #[error("{count} prediction ids have no score, first {first:?}")]
    JoinMismatch { count: usize, first: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Score(ScoreError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            _ => EXIT_FAILED,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::Backend(BackendError::Config(m)) => Self::Config(m),
            other => Self::Score(other),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Config(m) => Self::Config(m),
            other => Self::Score(ScoreError::Backend(other)),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        Self::Config(e.to_string())
    }
}
