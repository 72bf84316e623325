//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid axis {axis} for rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },

    #[error("point {point:?} out of bounds for volume {size:?}")]
    OutOfBounds { point: [f64; 3], size: [usize; 3] },

    #[error("sampled field of view leaves the phantom at timestep {timestep}")]
    FovOutOfBounds { timestep: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model build error: {0}")]
    Build(String),

    #[error("backward called without a recorded forward pass")]
    EmptyTape,

    #[error("empty input: {0}")]
    Empty(String),

    #[error("correlation undefined: every output component has zero variance")]
    UndefinedCorrelation,

    #[error("loss became non-finite at epoch {epoch}, batch {batch}; recent losses: {tail:?}")]
    NanLoss {
        epoch: usize,
        batch: usize,
        tail: Vec<f64>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed {what}")]
    Format { path: PathBuf, what: String },

    #[error("{path}: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum {
        path: PathBuf,
        stored: u32,
        computed: u32,
    },

    #[error("{path}: format version {found}, expected {expected}")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, what: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            what: what.into(),
        }
    }
}
