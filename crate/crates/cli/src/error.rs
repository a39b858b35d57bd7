use std::io;
use std::path::{Path, PathBuf};

use qsgauc_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Config(String),
    #[error("{context}: {source}")]
    Core { context: String, source: CoreError },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn core(context: impl Into<String>, source: CoreError) -> Self {
        CliError::Core {
            context: context.into(),
            source,
        }
    }

    /// Stable identifier printed as `error[CODE]`.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "E_IO",
            CliError::Config(_) => "E_CONFIG",
            CliError::Core { source, .. } => match source {
                CoreError::InvalidParameter(_) => "E_PARAM",
                CoreError::InvalidInput(_) => "E_INPUT",
                CoreError::DimensionMismatch { .. } => "E_DIM",
                CoreError::EmptyPool(_) => "E_EMPTY_POOL",
                CoreError::Parse { .. } => "E_PARSE",
                CoreError::ModelFormat(_) => "E_MODEL",
                CoreError::Diverged(_) => "E_DIVERGED",
                CoreError::SingleClass { .. } => "E_SINGLE_CLASS",
                CoreError::OverCap { .. } => "E_OVER_CAP",
                CoreError::UnsafeSchedule(_) => "E_SCHEDULE",
                CoreError::Linalg(_) => "E_LINALG",
                CoreError::Io(_) => "E_IO",
            },
        }
    }

    /// The one-line form written to stderr.
    pub fn report(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error[{}]: {msg}", self.code())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
