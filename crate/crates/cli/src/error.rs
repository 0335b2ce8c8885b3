use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] qnls_core::Error),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("config file {path}: {source}")]
    ReadConfig { path: PathBuf, source: std::io::Error },

    #[error("subcommand `{command}` does not match the config task `{task}`")]
    TaskMismatch { command: String, task: String },

    #[error("run directory {0} already exists")]
    RunExists(PathBuf),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Stable machine-readable tag for the error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Config(_) | CliError::Toml(_) | CliError::ReadConfig { .. } => "config",
            CliError::TaskMismatch { .. } => "task_mismatch",
            CliError::RunExists(_) => "run_exists",
            CliError::Json(_) => "serialization",
            CliError::Io(_) => "io",
        }
    }
}
