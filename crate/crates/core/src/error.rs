use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("action {action} has no remaining stock")]
    OutOfStock { action: usize },

    #[error("action index {action} out of range for {count} actions")]
    ActionOutOfRange { action: usize, count: usize },

    #[error("user index {user} out of range for {count} users")]
    UserOutOfRange { user: usize, count: usize },

    #[error("no action has remaining stock")]
    NoAvailableAction,

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: (usize, usize), found: (usize, usize) },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("reward rows do not share one preference order")]
    NoSharedOrder,

    #[error("enumeration over {users} users exceeds the budget of {limit}")]
    EnumerationTooLarge { users: usize, limit: usize },

    #[error("denominator policy value {0} is not positive")]
    NonPositiveBaseline(f64),

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("invalid configuration: {}", format_diagnostics(.0))]
    Config(Vec<crate::experiment::Diagnostic>),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

fn format_diagnostics(diags: &[crate::experiment::Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}
