use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("tail is not integrable (decay exponent {0} <= 1)")]
    TailNotIntegrable(f64),
    #[error("field grid does not match operator grid")]
    GridMismatch,
    #[error("Gamma pole: argument {0} is a nonpositive integer")]
    Pole(f64),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("argument must be positive, got {0}")]
    NonpositiveArgument(f64),
    #[error("argument must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("Newton iteration diverged at t = {time} (dt = {dt}, residual {residual:e})")]
    NewtonDiverged { time: f64, dt: f64, residual: f64 },
    #[error("epsilon ordering violated by {violation:e} at t = {time}")]
    OrderViolation { time: f64, violation: f64 },
    #[error("epsilon extrapolation does not converge: {0}")]
    NonConvergent(String),
    #[error("rescaled profiles are not converging")]
    NotConverging,
    #[error("profile must be positive everywhere")]
    NonpositiveProfile,
    #[error("field is not rearranged (symmetric and nonincreasing)")]
    NotRearranged,
    #[error("fields carry different mass: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("test function support leaves the window: {0}")]
    SupportViolation(String),
    #[error("fit window too short: {0}")]
    WindowTooShort(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
