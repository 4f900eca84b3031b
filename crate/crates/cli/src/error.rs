use std::path::PathBuf;

use thiserror::Error;

/// Process exit status: 0 success, 1 failed scientific check, 2 usage or config error.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("check failed: {0}")]
    Check(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] qmpe_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use qmpe_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Core(E::Dimension(_) | E::Domain(_) | E::Validation(_) | E::Precondition(_) | E::NotApplicable(_)) => 2,
            CliError::Check(_) | CliError::Io { .. } | CliError::Core(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
