use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(PathBuf),
    #[error("corrupt image data in {path}: {reason}")]
    CorruptData { path: PathBuf, reason: String },
    #[error("i/o failure on {path}: {reason}")]
    IoFailure { path: PathBuf, reason: String },

    #[error("invalid plane: {0}")]
    InvalidPlane(String),
    #[error("gaussian sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("at least 2 pixels are required, got {0}")]
    TooFewPixels(usize),
    #[error("component index {0} out of range (expected 0..3)")]
    IndexOutOfRange(usize),

    #[error("image {height}x{width} is smaller than the required {min}x{min}")]
    ImageTooSmall {
        height: usize,
        width: usize,
        min: usize,
    },
    #[error("requested {requested} decomposition levels, at most {max} allowed")]
    TooManyLevels { requested: usize, max: usize },
    #[error("level {level} out of range 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("linking kernel radius must be at least 1")]
    NonPositiveRadius,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("no input channels supplied")]
    EmptyInput,

    #[error("ground truth has no positive pixels")]
    EmptyGroundTruth,
    #[error("ground truth needs at least one positive and one negative pixel")]
    DegenerateGroundTruth,
    #[error("image {image:?} and mask {mask:?} dimensions differ")]
    DimensionMismatch {
        image: (usize, usize),
        mask: (usize, usize),
    },
    #[error("dataset contains no valid image/mask pairs")]
    NoValidPairs,
    #[error("unknown {kind} '{value}'")]
    UnknownName { kind: &'static str, value: String },
    #[error("report output failed: {0}")]
    Report(String),
}
