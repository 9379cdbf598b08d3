//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument (non-finite input, empty sample, mismatched grids, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Inconsistent or unusable configuration (bad ladder, V = 0 network, ...).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Operation applied in the wrong object state (double noise corruption, ...).
    #[error("state error: {0}")]
    State(String),

    /// A numerical routine failed to converge or produced a degenerate value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Tabulation grid too coarse for the requested bandwidth.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Model violates a structural precondition (non-fragment Bayes set, ...).
    #[error("model error: {0}")]
    Model(String),

    /// Parameter regime outside what the implementation supports.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for configuration/input problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Configuration(_)
            | Error::State(_)
            | Error::Model(_)
            | Error::UnsupportedRegime(_)
            | Error::Io(_) => 2,
            Error::Numeric(_) | Error::Resolution(_) => 3,
        }
    }
}
