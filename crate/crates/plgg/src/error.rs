use std::path::PathBuf;

use plgg_core::error::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: unsupported NIfTI datatype code {code}")]
    UnsupportedDatatype { path: PathBuf, code: i16 },
    #[error("{path}: unsupported image shape: {reason}")]
    Shape { path: PathBuf, reason: String },
    #[error("{path}: missing or unexpected column {column}")]
    Schema { path: PathBuf, column: String },
    #[error("{path}: row {row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("config {field}: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

impl Error {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub fn config(field: impl Into<String>, message: impl ToString) -> Error {
        Error::Config { field: field.into(), message: message.to_string() }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => EXIT_CONFIG,
            Error::Core(
                CoreError::DegenerateLabels | CoreError::FoldDegenerate { .. } | CoreError::CohortTooSmall { .. },
            ) => EXIT_DEGENERATE,
            _ => EXIT_DATA,
        }
    }
}
