use std::io;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice dimensions must be positive (got {rows}x{cols})")]
    ZeroDimension { rows: usize, cols: usize },

    #[error("target node count {0} is below the 12-node single hexagon")]
    TargetTooSmall(usize),

    #[error("spin vector has length {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("spin value {0} is not +1 or -1")]
    InvalidSpin(i64),

    #[error("empty spin vector")]
    EmptySpins,

    #[error("degenerate spectrum: c_max ({c_max}) must exceed c_min ({c_min})")]
    DegenerateSpectrum { c_min: f64, c_max: f64 },

    #[error("polynomial term of order {0} exceeds the supported maximum of 3")]
    OrderTooHigh(usize),

    #[error("penalty weight must be positive and finite (got {0})")]
    InvalidPenalty(f64),

    #[error("value {value} for variable {var} is not binary")]
    NonBinary { var: String, value: f64 },

    #[error("model has no nonzero coefficient, so there is no energy scale")]
    NoEnergyScale,

    #[error("invalid annealing schedule: {0}")]
    InvalidSchedule(String),

    #[error("{what} must be at least {min} (got {got})")]
    TooFew { what: &'static str, min: usize, got: usize },

    #[error("{n} variables exceeds the exhaustive search limit of {limit}")]
    TooManyVariables { n: usize, limit: usize },

    #[error("certificate objective {claimed} disagrees with re-evaluated energy {actual}")]
    ObjectiveMismatch { claimed: f64, actual: f64 },

    #[error("confidence must lie strictly between 0 and 1 (got {0})")]
    InvalidConfidence(f64),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("malformed {format}: {message}")]
    Parse { format: &'static str, message: String },

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(format: &'static str, message: impl Into<String>) -> Self {
        Error::Parse {
            format,
            message: message.into(),
        }
    }
}
