use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("embedding length mismatch: shape {shape:?} implies {expected} values, got {actual}")]
    EmbeddingLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },

    #[error("invalid annotation: {0}")]
    Annotation(String),

    #[error("pre-annotation references unknown frame {video_id}#{frame_index}")]
    DanglingFrame { video_id: String, frame_index: u64 },

    #[error("timer series has no valid readings")]
    EmptyTimer,

    #[error("series too short: need at least {needed} samples, got {actual}")]
    TooShort { needed: usize, actual: usize },

    #[error("empty pixel crop")]
    EmptyCrop,

    #[error("invalid feature configuration: {0}")]
    Feature(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("training error: {0}")]
    Training(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("invalid segmentation input: {0}")]
    Segment(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("chain constraint violated: standing implies active implies match")]
    Chain,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    /// True for failures of the underlying filesystem or stream, as opposed to
    /// bad data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            Error::Json(e) => e.is_io(),
            Error::Image(image::ImageError::IoError(_)) => true,
            _ => false,
        }
    }
}
