use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter value whose limiting case is deliberately not implemented.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A panel or path invariant is violated.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("rank deficient design; offending columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable category used by the command-line front-end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) | Error::Unsupported(_) => "domain",
            Error::Config { .. } => "config",
            Error::Parse { .. } | Error::Invariant(_) => "data",
            Error::RankDeficient { .. }
            | Error::NonConvergence { .. }
            | Error::Singular(_)
            | Error::Estimation(_) => "estimation",
            Error::Io { .. } => "io",
        }
    }
}
