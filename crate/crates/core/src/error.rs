use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("integrity error in `{entry}`: {reason}")]
    Integrity { entry: String, reason: String },
    #[error("training diverged at step {step}: loss = {loss}")]
    Divergence { step: usize, loss: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed json: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn integrity(entry: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Integrity {
            entry: entry.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "E_CONFIG",
            Error::Dimension(_) => "E_DIMENSION",
            Error::Input(_) => "E_INPUT",
            Error::Argument(_) => "E_ARGUMENT",
            Error::Data(_) => "E_DATA",
            Error::Integrity { .. } => "E_INTEGRITY",
            Error::Divergence { .. } => "E_DIVERGENCE",
            Error::Io { .. } => "E_IO",
            Error::Json { .. } => "E_JSON",
        }
    }

    /// Process exit code: 2 config, 3 data, 4 integrity, 5 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) | Error::Dimension(_) => 2,
            Error::Input(_) | Error::Data(_) | Error::Io { .. } | Error::Json { .. } => 3,
            Error::Integrity { .. } => 4,
            Error::Divergence { .. } => 5,
        }
    }
}
