use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed config document. Line and column are 1-based.
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid `{field}`: {constraint}")]
    Validation { field: String, constraint: String },

    #[error("{kind} not found: {id}")]
    NotFound { kind: &'static str, id: String },

    #[error("{kind} already exists: {id}")]
    Duplicate { kind: &'static str, id: String },

    #[error("arithmetic overflow while computing {0}")]
    Overflow(String),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("incomplete sweep, missing cells: {}", .0.join(", "))]
    IncompleteSweep(Vec<String>),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("digest is empty")]
    EmptyDigest,

    #[error("malformed {what} at line {line}: {message}")]
    Malformed {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad input rather than a fault in the system.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Syntax { .. }
            | Error::Validation { .. }
            | Error::NotFound { .. }
            | Error::Duplicate { .. }
            | Error::Overflow(_)
            | Error::IncompleteSweep(_)
            | Error::UnknownMetric(_)
            | Error::EmptyDigest
            | Error::Malformed { .. } => true,
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Backend(_)
            | Error::ReplayMismatch(_)
            | Error::Json(_)
            | Error::Csv(_) => false,
        }
    }
}

/// Converts a TOML deserialization error into a positioned syntax error.
pub(crate) fn from_toml(text: &str, err: toml::de::Error) -> Error {
    let (line, column) = match err.span() {
        Some(span) => line_col(text, span.start),
        None => (0, 0),
    };
    Error::Syntax {
        line,
        column,
        message: err.message().trim().to_string(),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, column)
}
