use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the core library.
///
/// Variants group into the four classes the CLI maps onto exit codes:
/// configuration, data (format, validation, I/O), degenerate input and
/// numeric failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numeric error after {iterations} iterations: {message}")]
    Numeric { message: String, iterations: usize },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
