use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("matrix is rank deficient (smallest singular value {smallest:e}, largest {largest:e})")]
    Singular { smallest: f64, largest: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Ingestion {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("could not sample a connected graph with d = {d}, prob = {prob} after {attempts} attempts")]
    Connectivity { d: usize, prob: f64, attempts: usize },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("non-finite iterate at iteration {iteration}, agent {agent}")]
    Divergence { iteration: usize, agent: usize },

    #[error("brute-force oracle supports at most {max} entries, got {got}")]
    OracleScale { max: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
