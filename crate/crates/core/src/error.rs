use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("inconsistent frame dimensions: expected {expected:?}, got {got:?}")]
    FrameDimensions {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("video has zero frames")]
    NoFrames,

    #[error("invalid video: {0}")]
    InvalidVideo(String),

    #[error("empty time window [{start}, {end})")]
    EmptyWindow { start: f64, end: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("video of {duration:.3} s is shorter than one {clip:.3} s clip")]
    VideoTooShort { duration: f64, clip: f64 },

    #[error("unsupported spatial layout {0}x{1}")]
    UnsupportedLayout(u32, u32),

    #[error("invalid feature grid: {0}")]
    InvalidFeatures(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid label: {0}")]
    Label(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("pipeline mismatch: {0}")]
    PipelineMismatch(String),

    #[error("numeric divergence: {0}")]
    Divergence(String),

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

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Divergence(_) => 3,
            _ => 2,
        }
    }
}
