use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed JSON or a field of the wrong type; serde reports line and column.
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// Well-formed JSON that does not describe a valid system.
    #[error("{path}:{line}: {message}")]
    Schema { path: PathBuf, line: usize, message: String },

    #[error(transparent)]
    Core(#[from] horizon_core::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Process exit code: 1 for rejected input files, 2 for numerical
    /// failures, 3 for bad invocations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Json { .. } | Error::Schema { .. } => 1,
            Error::Usage(_) => 3,
            Error::Io { .. } | Error::Core(_) | Error::Csv(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
