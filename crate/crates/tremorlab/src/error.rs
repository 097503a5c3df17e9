use std::path::{Path, PathBuf};

/// Failures of the host-side commands, grouped by process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl CliError {
    pub const EXIT_VALIDATION: i32 = 2;
    pub const EXIT_IO: i32 = 3;
    pub const EXIT_INSUFFICIENT: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => Self::EXIT_VALIDATION,
            CliError::Io { .. } | CliError::Format { .. } => Self::EXIT_IO,
            CliError::InsufficientData(_) => Self::EXIT_INSUFFICIENT,
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn format(path: impl AsRef<Path>, message: impl ToString) -> Self {
        CliError::Format {
            path: path.as_ref().to_path_buf(),
            message: message.to_string(),
        }
    }
}

impl From<tremorlab_core::Error> for CliError {
    fn from(e: tremorlab_core::Error) -> Self {
        match e {
            tremorlab_core::Error::InsufficientData(m) => CliError::InsufficientData(m),
            tremorlab_core::Error::EmptyInput => CliError::InsufficientData("no sessions to analyze".into()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
