use thiserror::Error;

use crate::sdp::SdpStatus;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("not a valid density operator: {0}")]
    InvalidState(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("observed data admit no compatible state: {0}")]
    InconsistentData(String),
    #[error("malformed SDP: {0}")]
    MalformedProblem(String),
    #[error("solver stopped with status {status:?} after {iterations} iterations")]
    Solver { status: SdpStatus, iterations: usize },
    #[error("predicate not bracketed on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },
    #[error("protocol file: {0}")]
    ProtocolFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
