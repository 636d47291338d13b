use std::path::PathBuf;

use thiserror::Error;

/// Unified error type for the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite value in {context}: {value}")]
    NonFinite { context: &'static str, value: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("parse error in {path:?} at byte {offset}: {reason}")]
    Parse {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("event out of sensor bounds: ({x}, {y}) on a {width}x{height} sensor")]
    EventOutOfBounds {
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },

    #[error("event timestamps not sorted: event {index} has t={t} after t={prev}")]
    EventsUnsorted { index: usize, t: f64, prev: f64 },

    #[error("training failed: {0}")]
    Training(String),

    #[error("calibration statistics unavailable: run a calibration pass over clean samples first")]
    MissingCalibration,

    #[error("gradient unavailable: {0}")]
    GradientUnavailable(String),

    #[error("quality gate failed: accuracy {accuracy:.2}% is below the constraint {quality:.2}%")]
    QualityGate { accuracy: f64, quality: f64 },

    #[error("checkpoint not cached and training is disabled for this run")]
    CacheMiss,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
