use std::path::PathBuf;

/// Errors produced by the signature-control library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("depth mismatch: expected {expected}, found {found}")]
    DepthMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("paths do not join: endpoint gap {gap:.3e} exceeds tolerance")]
    EndpointMismatch { gap: f64 },

    #[error("signature kernel grid too large: {rows}x{cols} cells exceeds cap {cap}")]
    GridOverflow { rows: usize, cols: usize, cap: usize },

    #[error("no candidate matches reward {value} (row entry {index})")]
    UnmatchedValue { index: usize, value: f64 },

    #[error("reward {value} (row entry {index}) matches more than one state")]
    AmbiguousValue { index: usize, value: f64 },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
