use std::path::PathBuf;

use sea_walk_core::Error as CoreError;

/// Exit codes of the `sea-walk` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("serializing {what}: {source}")]
    Json {
        what: &'static str,
        #[source]
        source: serde_json::Error,
    },

    #[error("run aborted at step {step}: {source}")]
    Aborted {
        step: usize,
        #[source]
        source: CoreError,
    },

    #[error("{failed} of {total} sweep cells failed")]
    SweepFailures { failed: usize, total: usize },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Argument(_) => exit::CONFIG,
            CliError::Io { .. } | CliError::Csv { .. } | CliError::Json { .. } => exit::IO,
            CliError::Aborted { .. } | CliError::SweepFailures { .. } => exit::NUMERICAL,
            CliError::Core(e) if e.is_numerical() => exit::NUMERICAL,
            CliError::Core(_) => exit::CONFIG,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
