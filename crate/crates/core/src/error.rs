use core::fmt;

use crate::bb84::SessionStats;
use crate::channel::ProtocolError;

/// Errors returned by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A Stokes vector or Mueller matrix violates physicality beyond tolerance.
    NonPhysical(&'static str),
    /// A parameter is outside its admissible range.
    InvalidParameter(&'static str),
    /// Measurement input rejected (e.g. negative intensity).
    InvalidInput(&'static str),
    /// The polarimetric design matrix is too ill-conditioned to invert.
    IllConditioned { condition_number: f64 },
    /// QBER requested on empty keys.
    UndefinedQber,
    /// Classical-channel or reconciliation protocol failure.
    Protocol(ProtocolError),
    /// The sifted key is too short to post-process; carries the partial statistics.
    InsufficientKey { sifted_bits: usize, stats: SessionStats },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonPhysical(what) => write!(f, "non-physical input: {what}"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::InvalidInput(what) => write!(f, "invalid input: {what}"),
            Error::IllConditioned { condition_number } => {
                write!(f, "design matrix ill-conditioned (condition number {condition_number:e})")
            }
            Error::UndefinedQber => f.write_str("QBER undefined for empty keys"),
            Error::Protocol(e) => write!(f, "protocol error: {e}"),
            Error::InsufficientKey { sifted_bits, .. } => {
                write!(f, "sifted key too short for post-processing ({sifted_bits} bits)")
            }
        }
    }
}

impl core::error::Error for Error {}

impl From<ProtocolError> for Error {
    fn from(e: ProtocolError) -> Self {
        Error::Protocol(e)
    }
}
