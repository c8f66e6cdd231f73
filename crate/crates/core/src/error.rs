use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// Input outside the domain of an operation (e.g. reducing an empty tensor).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Reference solver produced non-finite values.
    #[error("integration blew up at step {step}")]
    IntegrationBlowup { step: usize },

    /// Latent rollout produced non-finite values.
    #[error("rollout diverged at step {step}")]
    RolloutDivergence { step: usize },

    /// Invalid experiment, loss or search configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed dataset, checkpoint or results file.
    #[error("{path}: malformed file: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for the failure modes a training run records as divergence.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::RolloutDivergence { .. })
    }
}
