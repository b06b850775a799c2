//! Error taxonomy shared across the workspace.
//!
//! The CLI maps error kinds to exit codes: configuration problems exit 2,
//! data problems exit 3, numeric aborts exit 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad values, unknown keys, incompatible settings.
    #[error("config error: {0}")]
    Config(String),

    /// Bad or missing data: corpora, checkpoints, landmark files, shape
    /// mismatches between artifacts.
    #[error("data error: {0}")]
    Data(String),

    /// Training produced a non-finite loss or another numeric invariant broke.
    #[error("numeric abort: {0}")]
    Numeric(String),

    #[error(transparent)]
    Candle(#[from] candle_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code for this error kind (0 is success, reserved).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) | Error::Json(_) | Error::Candle(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
