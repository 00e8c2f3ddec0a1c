use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// A file that parsed but does not fit the expected layout, with the
    /// location of the problem when it is known.
    #[error("{path}:{location}: {message}")]
    Format {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("{path}: written by schema version {found}, this build reads version {expected}")]
    Version {
        path: PathBuf,
        found: u64,
        expected: u32,
    },

    #[error("{path}: {rejected} of {total} rows rejected, above the {threshold_percent}% limit (first: {first})")]
    TooManyBadRows {
        path: PathBuf,
        rejected: usize,
        total: usize,
        threshold_percent: f64,
        first: String,
    },

    #[error(transparent)]
    Model(#[from] cwloop_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, location: impl ToString, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            location: location.to_string(),
            message: message.to_string(),
        }
    }
}
