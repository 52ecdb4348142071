//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad key, bad value, inconsistent settings).
    #[error("config error: {0}")]
    Config(String),
    /// Problem with dataset contents (labels, splits, manifests, audio payloads).
    #[error("data error: {0}")]
    Data(String),
    /// Tensor shape mismatch.
    #[error("shape error: {0}")]
    Shape(String),
    /// Malformed container (RIFF header, feature file, checkpoint).
    #[error("format error: {0}")]
    Format(String),
    /// Well-formed but unsupported encoding.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Training aborted on a non-finite loss.
    #[error("numeric abort: {0}")]
    Numeric(String),
    /// API contract violation (e.g. backward on a non-scalar).
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numeric abort, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Format(_) | Error::Unsupported(_) => 3,
            Error::Numeric(_) => 4,
            _ => 1,
        }
    }

    /// Short machine-parsable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Shape(_) => "shape",
            Error::Format(_) => "format",
            Error::Unsupported(_) => "unsupported",
            Error::Numeric(_) => "numeric",
            Error::Contract(_) => "contract",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
