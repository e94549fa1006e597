use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("{}:{line}: {reason}", path.display())]
    ConfigFile { path: PathBuf, line: usize, reason: String },
    #[error("sweep: {0}")]
    Sweep(String),
    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: bsde_cfft::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn config_err(field: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}
