use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

use crate::artifact::ArtifactError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Validation(String),

    #[error("artifact {path}: {source}")]
    Artifact {
        path: PathBuf,
        #[source]
        source: ArtifactError,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("selftest failed: {0}")]
    Selftest(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Validation(_) => 4,
            CliError::Artifact { .. } => 5,
            CliError::Numerical(_) => 6,
            CliError::Selftest(_) => 7,
        }
    }

    pub fn exit(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }
}

impl From<tabpat::Error> for CliError {
    fn from(e: tabpat::Error) -> Self {
        match e {
            tabpat::Error::Numerical { .. } | tabpat::Error::Convergence { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
