use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An experiment or stream configuration failed validation.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("stream exhausted after {0} instances")]
    EndOfStream(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("failed to parse {origin}: {message}")]
    Toml { origin: String, message: String },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when writing failed because the reader closed the pipe.
    pub fn is_broken_pipe(&self) -> bool {
        let io = match self {
            Error::Io { source, .. } => Some(source),
            Error::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(io) => Some(io),
                _ => None,
            },
            _ => None,
        };
        io.is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
    }

    /// True for errors that stem from user-provided configuration.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Toml { .. })
    }
}
