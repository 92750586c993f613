use std::path::PathBuf;

use thiserror::Error;

/// Harness errors. Each maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] embclust_core::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("search failed: {0}")]
    Search(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Process exit codes.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use embclust_core::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::Search(_) => EXIT_CONFIG,
            HarnessError::Io { .. } | HarnessError::Data(_) => EXIT_DATA,
            HarnessError::Core(e) => match e {
                E::Config(_) => EXIT_CONFIG,
                E::Io { .. } | E::Format(_) | E::Validation(_) | E::Degenerate(_) => EXIT_DATA,
                E::Numeric { .. } | E::UndefinedCorrelation(_) => EXIT_NUMERIC,
            },
        }
    }
}
