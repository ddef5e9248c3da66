use thiserror::Error;

/// Errors raised by the solver and the diagnostic post-processing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unstable run: non-finite value at step {step} (t = {t})")]
    Unstable { step: usize, t: f64 },

    #[error("indeterminate convergence order: successive differences {0:e} below threshold")]
    IndeterminateOrder(f64),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("recorder `{name}` failed at step {step}: {source}")]
    Recorder {
        name: &'static str,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
