use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the pipeline. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("data error in subject {subject}: {detail}")]
    Data { subject: String, detail: String },

    #[error("malformed manifest {path}: {detail}")]
    Manifest { path: PathBuf, detail: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("leakage guard tripped: validation subject {0} reached a training-only computation")]
    Leakage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(subject: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Data {
            subject: subject.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code: 2 usage/config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. }
            | Error::MissingFile(_)
            | Error::Data { .. }
            | Error::Manifest { .. } => 3,
            Error::Shape(_) | Error::Numeric(_) | Error::Leakage(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
