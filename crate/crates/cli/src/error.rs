use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("domain violation: {0}")]
    Domain(dualflat::Error),
    #[error("{0}")]
    Core(#[from] dualflat::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Domain(_) => ExitCode::from(2),
            CliError::Input(_) | CliError::Io { .. } | CliError::Core(_) => ExitCode::from(1),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
