use thiserror::Error;

pub type Result<T, E = ClusterError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error(transparent)]
    Core(#[from] servbench_core::error::Error),

    /// Bad input: malformed traces, unknown policies, empty job sets.
    #[error("{0}")]
    User(String),

    #[error("malformed trace at line {line}: {message}")]
    Trace { line: usize, message: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("leader error: {0}")]
    Remote(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ClusterError {
    pub fn is_user_error(&self) -> bool {
        match self {
            ClusterError::Core(e) => e.is_user_error(),
            ClusterError::User(_) | ClusterError::Trace { .. } | ClusterError::Remote(_) => true,
            ClusterError::Protocol(_) | ClusterError::Io(_) | ClusterError::Json(_) => false,
        }
    }
}
