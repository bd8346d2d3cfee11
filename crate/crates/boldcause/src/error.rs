use std::io;
use std::path::PathBuf;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed input file.
    #[error("format error: {0}")]
    Format(String),
    /// Bad flag value or inconsistent inputs.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Core(#[from] boldcause_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub const EXIT_IO: u8 = 1;
    pub const EXIT_FORMAT: u8 = 2;
    pub const EXIT_PARAMETER: u8 = 3;

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Format(_) => Self::EXIT_FORMAT,
            CliError::Parameter(_) | CliError::Core(_) => Self::EXIT_PARAMETER,
            CliError::Io { .. } => Self::EXIT_IO,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
