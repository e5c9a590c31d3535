use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    Input { path: PathBuf, line: u64, message: String },

    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] skewmsv::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "config",
            CliError::Input { .. } => "input",
            CliError::Artifact { .. } => "artifact",
            CliError::Io { .. } => "io",
            CliError::Model(_) => "model",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn artifact(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        CliError::Artifact { path: path.into(), message: message.to_string() }
    }

    pub fn record(&self, command: Option<&str>) -> ErrorRecord {
        let (path, line) = match self {
            CliError::Config { path, .. } | CliError::Artifact { path, .. } | CliError::Io { path, .. } => {
                (Some(path.display().to_string()), None)
            }
            CliError::Input { path, line, .. } => (Some(path.display().to_string()), Some(*line)),
            _ => (None, None),
        };
        ErrorRecord { kind: self.kind(), command: command.map(str::to_owned), message: self.to_string(), path, line }
    }
}

/// Machine-readable failure report written to stderr and `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub command: Option<String>,
    pub message: String,
    pub path: Option<String>,
    pub line: Option<u64>,
}

pub type CliResult<T> = std::result::Result<T, CliError>;
