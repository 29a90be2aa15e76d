use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("stratification unsatisfiable: {0}")]
    Stratification(String),

    #[error("dimension mismatch: expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hyperparameter `{key}` is not supported by {kind}")]
    UnsupportedParam { kind: String, key: String },

    #[error("hyperparameter `{key}`: {msg}")]
    InvalidParam { key: String, msg: String },

    #[error("invalid hierarchy: {0}")]
    InvalidTree(String),

    #[error("training unsatisfiable: {0}")]
    UnsatisfiableTraining(String),

    #[error("scheme model incomplete: {0}")]
    MissingClassifier(String),

    #[error("undefined learning efficiency: flat macro-F1 is zero")]
    UndefinedLearningEfficiency,

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad configuration or arguments.
    Config,
    /// Unreadable, malformed, or unsuitable input data.
    Data,
    /// Solver or arithmetic breakdown.
    Numeric,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::InvalidDataset(_)
            | Error::Stratification(_)
            | Error::DimensionMismatch { .. }
            | Error::UnsatisfiableTraining(_)
            | Error::Serde(_) => ErrorCategory::Data,
            Error::Numeric(_) | Error::UndefinedLearningEfficiency => ErrorCategory::Numeric,
            Error::InvalidArgument(_)
            | Error::UnsupportedParam { .. }
            | Error::InvalidParam { .. }
            | Error::InvalidTree(_)
            | Error::MissingClassifier(_) => ErrorCategory::Config,
            Error::Fold { source, .. } => source.category(),
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Error {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }
}
