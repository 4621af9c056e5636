use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: usize, right: usize },
    #[error("degree {degree} exceeds dimension {max}")]
    DegreeOverflow { degree: usize, max: usize },
    #[error("{op} undefined on degree {degree}")]
    DegreeUnderflow { op: &'static str, degree: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("cochain kind mismatch: {0}")]
    KindMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("CFL violation: dt={dt} exceeds limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("unstable integration at t={at}; last stable time {last_stable}")]
    Unstable { at: f64, last_stable: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
