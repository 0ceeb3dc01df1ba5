use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate direction")]
    DegenerateDirection,

    #[error("ambisonic order {0} is outside the supported range 0..=7")]
    InvalidOrder(usize),

    #[error("order mismatch: expected {expected}, found {found}")]
    OrderMismatch { expected: usize, found: usize },

    #[error("sample-rate mismatch in {path}: expected {expected} Hz, found {found} Hz")]
    SampleRateMismatch {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("non-finite sample in {0}")]
    NonFinite(String),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no energy in signal")]
    NoEnergy,

    #[error("energy grid mismatch: {0:?} vs {1:?}")]
    GridMismatch((usize, usize), (usize, usize)),

    #[error("degenerate labels: every cell falls in one class")]
    DegenerateLabels,

    #[error("empty HRIR grid")]
    EmptyGrid,

    #[error("session is closed")]
    SessionClosed,

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("optimization diverged at iteration {iteration} (loss trace has {} entries)", trace.len())]
    Diverged { iteration: usize, trace: Vec<f64> },

    #[error("malformed raster {0}")]
    Raster(String),

    #[error("malformed frame: {0}")]
    Protocol(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
