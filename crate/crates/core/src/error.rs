use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported quadrature level {level} (max {max})")]
    UnsupportedLevel { level: usize, max: usize },

    #[error("solver became unstable at step {step} (t = {time:.3} s): {detail}")]
    Instability { step: usize, time: f64, detail: String },

    #[error("misaligned data: {0}")]
    Misaligned(String),

    #[error("incomplete ensemble: {failed} of {total} realizations failed or missing")]
    IncompleteEnsemble { failed: usize, total: usize },

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), detail: detail.into() }
    }

    /// Process exit code for the CLI: 2 config, 3 numeric, 4 integrity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Io { .. } | Error::InvalidInput(_) => 2,
            Error::Domain(_)
            | Error::DimensionMismatch { .. }
            | Error::UnsupportedLevel { .. }
            | Error::Instability { .. }
            | Error::Sampler(_) => 3,
            Error::Misaligned(_) | Error::IncompleteEnsemble { .. } | Error::Integrity(_) => 4,
        }
    }
}
