use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain an operation accepts (probabilities
    /// outside [0, 1], frequencies above Nyquist, empty signals).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Observation addresses or dataset rows that do not fit the machine.
    #[error("input error: {0}")]
    Input(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("compile error: {0}")]
    Compile(String),

    /// Malformed serialized artifact (bad magic, checksum, schema).
    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad or missing user-supplied artifacts or
    /// settings, as opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            _ => true,
        }
    }
}
