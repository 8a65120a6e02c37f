use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] pcam::Error),

    #[error("gradient check failed: max relative error {max_error:.3e} exceeds {tolerance:.0e}")]
    GradCheckFailed { max_error: f64, tolerance: f64 },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io { .. } | HarnessError::Csv(_) => 3,
            HarnessError::Core(e) => match e {
                pcam::Error::Io { .. } | pcam::Error::Format { .. } | pcam::Error::UnsupportedFormat(_) => 3,
                _ => 2,
            },
            HarnessError::GradCheckFailed { .. } => 4,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
