use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: index {value} out of range [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: i64,
        min: i64,
        max: i64,
    },

    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    #[error("degenerate biphoton state: {0}")]
    DegenerateState(String),

    #[error("truncation window too small: tail weight {tail:.3e} exceeds {limit:.1e}")]
    Truncation { tail: f64, limit: f64 },

    #[error("mask layout error: {0}")]
    Layout(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("reconstruction error: {0}")]
    Reconstruction(String),

    #[error("fidelity undefined: {0}")]
    UndefinedFidelity(String),

    #[error("QBER undefined: zero total coincidences")]
    UndefinedQber,

    #[error("no key possible: QBER {qber:.4} is at or above 0.5")]
    NoKey { qber: f64 },

    #[error("capacity error: {users} users need {needed} pairs, only {available} usable")]
    Capacity {
        users: usize,
        needed: usize,
        available: usize,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: message.into(),
        }
    }

    pub(crate) fn invalid_input(message: impl Into<String>) -> Self {
        Self::invalid("input", message)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
