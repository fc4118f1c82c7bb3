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

    #[error("{file}:{line}: malformed record: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },

    #[error("duplicate {kind} id `{id}`")]
    Duplicate { kind: &'static str, id: String },

    #[error("document `{doc_id}` references unknown author `{author_id}`")]
    UnknownAuthorReference { doc_id: String, author_id: String },

    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("missing prerequisite stage `{stage}`: {hint}")]
    MissingStage { stage: &'static str, hint: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("empty query")]
    EmptyQuery,

    #[error("query `{0}` has no linked entities and no matching terms")]
    NoTopicalMatch(String),
}

/// Coarse error classes, used for process exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    MissingStage,
    NotFound,
    NoMatch,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::MissingStage => 4,
            ErrorCategory::NotFound => 5,
            ErrorCategory::NoMatch => 6,
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) | Error::EmptyQuery => ErrorCategory::Usage,
            Error::MissingStage { .. } => ErrorCategory::MissingStage,
            Error::NotFound { .. } => ErrorCategory::NotFound,
            Error::NoTopicalMatch(_) => ErrorCategory::NoMatch,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Duplicate { .. }
            | Error::UnknownAuthorReference { .. }
            | Error::DimensionMismatch { .. } => ErrorCategory::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        Error::NotFound {
            kind,
            id: id.into(),
        }
    }
}
