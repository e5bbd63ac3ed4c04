use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A numerical failure that should not happen for valid input.
    #[error("internal numerical error: {0}")]
    Internal(String),

    #[error("fixed-point stage iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("stage values diverged (norm {norm:e} exceeds guard)")]
    Divergence { norm: f64 },

    /// The vector field lacks the derivative oracle a scheme needs.
    #[error("capability error: {0}")]
    Capability(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Trajectories or paths that cannot be compared with each other.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("study failed: {0}")]
    StudyFailed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Strips any [`Error::AtStep`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
