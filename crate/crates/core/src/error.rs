use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("matrix is numerically singular (failed pivot {pivot})")]
    Singular { pivot: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid pilot at index {index}: |x| = {magnitude}")]
    InvalidPilot { index: usize, magnitude: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code used by the CLI: 1 for configuration problems,
    /// 2 for runtime and numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Unsupported(_) | Error::InvalidDimension(_) => 1,
            Error::Shape(_)
            | Error::Singular { .. }
            | Error::InvalidPilot { .. }
            | Error::Io { .. } => 2,
        }
    }
}
