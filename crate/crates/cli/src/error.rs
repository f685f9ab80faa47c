use quench_core::{ErrorClass, QuenchError};
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] QuenchError),

    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Oracle(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            CliError::Config(_) | CliError::Io { .. } => ErrorClass::Config,
            CliError::Core(e) => e.class(),
            CliError::Numerical(_) => ErrorClass::Numerical,
            CliError::Oracle(_) => ErrorClass::Oracle,
        }
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.class())
    }
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Oracle => 4,
    }
}
