use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("cannot decode image {path}: {reason}")]
    Undecodable { path: PathBuf, reason: String },

    #[error("unsupported bit depth in {path}: {color} (only 8-bit images are accepted)")]
    UnsupportedBitDepth { path: PathBuf, color: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image encode failed for {path}: {reason}")]
    Encode { path: PathBuf, reason: String },

    #[error("missing `images/` directory under {0}")]
    MissingImagesDir(PathBuf),

    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),

    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("pixel buffer holds {actual} values, expected {expected}")]
    BufferLength { expected: usize, actual: usize },

    #[error("pixel value {value} at index {index} outside [0,1]")]
    OutOfRange { index: usize, value: f32 },

    #[error("empty image")]
    EmptyImage,

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error("degenerate calibration range for `{stat}`: min = max = {value}")]
    DegenerateCalibration { stat: &'static str, value: f64 },

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    EmbeddingDim { expected: usize, actual: usize },

    #[error("template bank is empty")]
    EmptyBank,

    #[error("duplicate template text `{0}`")]
    DuplicateTemplate(String),

    #[error("embedding file schema violation: {0}")]
    Schema(String),

    #[error("temperature must be positive, got {0}")]
    Temperature(f64),

    #[error("uniform noise draw {0} outside the open interval (0,1)")]
    NoiseDraw(f64),

    #[error("unknown operator `{0}`")]
    UnknownOperator(String),

    #[error("operator `{op}` takes {expected} parameters, got {actual}")]
    ThetaArity {
        op: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("parameter {value} outside the open interval (0,1)")]
    ThetaRange { value: f64 },

    #[error("invalid action index {0}")]
    InvalidAction(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("value {value} for `{what}` outside [0,1]")]
    Unit { what: &'static str, value: f64 },

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("sample `{0}` has no ground-truth mask")]
    MissingMask(String),

    #[error("external mask not found for sample `{id}` variant `{variant}`")]
    ExternalMaskMissing { id: String, variant: String },

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Coarse failure class used by the command-line front end to pick an exit code.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::FileNotFound(_)
            | Error::Io { .. }
            | Error::Encode { .. }
            | Error::MissingImagesDir(_)
            | Error::ExternalMaskMissing { .. } => ErrorClass::Io,
            Error::Config(_) | Error::CheckpointVersion { .. } => ErrorClass::Config,
            _ => ErrorClass::Validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Validation,
}
