use std::io;

use thiserror::Error;

/// Errors raised across the simulator, the control surface and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("no route from {from} to {to}")]
    Routing { from: String, to: String },
    #[error("invalid semaphore plan: {0}")]
    PlanInvalid(String),
    #[error("illegal action: {0}")]
    IllegalAction(String),
    #[error("lifecycle error: {0}")]
    Lifecycle(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("aggregation error: {0}")]
    Aggregation(String),
    #[error("demand generation error: {0}")]
    Generation(String),
    /// An `ERR` response received from the control surface.
    #[error("control API error {code}: {message}")]
    Api { code: String, message: String },
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors caused by bad user input rather than a failure while running.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::PlanInvalid(_) | Error::Format(_)
        )
    }
}
