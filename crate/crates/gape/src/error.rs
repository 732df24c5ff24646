use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid campaign: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] gape_core::Error),
    #[error("cannot read {path}: {source}")]
    Input { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Whether the error comes from the inputs rather than from running them.
    pub fn is_config(&self) -> bool {
        match self {
            HarnessError::Config(_)
            | HarnessError::Input { .. }
            | HarnessError::Toml { .. } | HarnessError::Json { .. } => true,
            HarnessError::Core(e) => matches!(e, gape_core::Error::Config(_)),
            HarnessError::Io { .. } | HarnessError::Csv(_) => false,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}

pub(crate) fn input_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Input { path, source }
}
