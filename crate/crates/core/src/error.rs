use std::io;

use thiserror::Error;

/// Errors produced across the toolkit.
///
/// The CLI maps the variants onto its exit-code contract, so new variants
/// must pick one of the existing categories.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("unsupported parameters: {0}")]
    Unsupported(String),

    #[error("verification failed at index {index}: {reason}")]
    Verification { index: usize, reason: String },

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("internal error at index {index}: {reason}")]
    Internal { index: usize, reason: String },

    #[error("not implemented: {0}")]
    NotImplemented(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
