use thiserror::Error;

/// Errors raised by the sampler, the oracles and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Invalid hyperparameters or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The proposal graph of a discrete chain does not connect every grid state.
    #[error("proposal is not irreducible: grid states {unreachable:?} are unreachable from state 0")]
    Unreachable { unreachable: Vec<usize> },

    #[error("step-size tuning failed: {0}")]
    Tuning(String),

    #[error("manifest field `{field}`: {reason}")]
    Schema { field: String, reason: String },

    /// An experiment's built-in correctness check did not hold.
    #[error("check failed: {0}")]
    Check(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors the CLI reports as configuration problems (exit code 1).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Schema { .. } | Error::Parse(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
