use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's preconditions (shapes, names, counts).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A physical value fell outside the domain of its transform.
    #[error("domain error in dimension `{dim}`: {msg}")]
    Domain { dim: String, msg: String },

    /// Covariance stayed indefinite after the jitter schedule was exhausted.
    #[error("covariance is not positive definite after {attempts} jitter attempts")]
    NotPositiveDefinite { attempts: usize },

    /// Integration produced non-finite or runaway state.
    #[error("simulation blew up at step {step}")]
    Blowup { step: usize },

    /// Every rollout of a cost batch blew up.
    #[error("degenerate distribution: all {0} cost rollouts failed")]
    DegenerateBatch(usize),

    /// Config text failed to parse or validate. `origin` names the file or
    /// override list; `line` is 1-based, 0 when no line is to blame.
    #[error("{origin}:{line}: {msg}")]
    Config {
        origin: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
