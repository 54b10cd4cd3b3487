use std::path::{Path, PathBuf};

use jeanie_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn data(path: &Path, message: impl ToString) -> Self {
        // keep diagnostics on one line
        let message = message.to_string().replace('\n', " ");
        CliError::Data { path: path.to_path_buf(), message }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidArgument(_)
            | CoreError::MissingParameter(_)
            | CoreError::ProtocolViolation(_)
            | CoreError::DegenerateGeometry(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
