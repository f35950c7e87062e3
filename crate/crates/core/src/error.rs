use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-positive channel gain {gain} for user {user}")]
    NonPositiveGain { user: usize, gain: f64 },

    #[error("negative load {load} for user {user}")]
    NegativeLoad { user: usize, load: f64 },

    #[error("invalid scenario: {}", format_violations(.0))]
    InvalidScenario(Vec<Violation>),

    #[error("slot index {slot} out of range for period {period}")]
    SlotOutOfRange { slot: usize, period: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("oracle guard: {dim} variables exceeds the limit of {limit}")]
    OracleDimension { dim: usize, limit: usize },

    #[error("per-period recording was not enabled for this run")]
    RecordingDisabled,

    #[error("config: {0}")]
    Config(String),

    #[error("trace {}: {message}", .path.display())]
    Trace { path: PathBuf, message: String },

    #[error("table file: {0}")]
    TableFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
