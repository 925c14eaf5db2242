use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error{}: {message}", entry.as_ref().map(|e| format!(" in entry {e}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        entry: Option<String>,
        message: String,
    },

    #[error("validation failed for `{id}`: {message}")]
    Validation { id: String, message: String },

    #[error("{path}: cannot decode image: {message}")]
    Image { path: PathBuf, message: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("incomplete series: {0}")]
    IncompleteSeries(String),

    #[error(transparent)]
    Adapter(#[from] crate::adapter::AdapterError),

    #[error("run aborted after {completed} of {total} cases: {cause}")]
    RunAborted {
        completed: usize,
        total: usize,
        cause: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
