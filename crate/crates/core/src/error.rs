use thiserror::Error;

/// Errors produced by the fusion library.
#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid class registry: {0}")]
    InvalidRegistry(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite input in {context}")]
    NonFiniteInput { context: &'static str },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("stamp {stamp} outside trajectory range [{first}, {last}] by more than slack {slack}")]
    StampOutOfRange {
        stamp: f64,
        first: f64,
        last: f64,
        slack: f64,
    },

    #[error("unknown camera '{0}'")]
    UnknownCamera(String),

    #[error("invalid detection box: {0}")]
    InvalidDetection(String),

    #[error("scan rejected: {0}")]
    ScanRejected(String),

    #[error("cloud must be in world frame for {0}")]
    WrongFrame(&'static str),

    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FusionError>;
