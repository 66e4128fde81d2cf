use std::path::{Path, PathBuf};

/// Errors raised by file handling and the command-line driver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// A file parsed but one of its fields is wrong or inconsistent.
    #[error("{}: field `{field}`: {message}", path.display())]
    Format { path: PathBuf, field: String, message: String },
    #[error("{}: cannot parse: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: image error: {message}", path.display())]
    Image { path: PathBuf, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] specpol_core::Error),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn format(path: &Path, field: &str, message: impl Into<String>) -> Self {
        Error::Format { path: path.to_path_buf(), field: field.to_string(), message: message.into() }
    }

    pub(crate) fn parse(path: &Path, message: impl ToString) -> Self {
        Error::Parse { path: path.to_path_buf(), message: message.to_string() }
    }

    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Core(specpol_core::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
