use std::path::PathBuf;

/// Errors produced by code construction, decoding and simulation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A caller broke an operation's documented precondition.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("planning error{}: {reason}", partition.map(|p| format!(" in partition {p}")).unwrap_or_default())]
    Planning { partition: Option<usize>, reason: String },

    #[error(
        "insufficient data: {frames} frames, {failures} failures, {e1_events} single-error events (need {required})"
    )]
    InsufficientData {
        frames: u64,
        failures: u64,
        e1_events: u64,
        required: u64,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn planning(partition: Option<usize>, reason: impl Into<String>) -> Self {
        Error::Planning {
            partition,
            reason: reason.into(),
        }
    }
}
