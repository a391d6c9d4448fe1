use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid rates (a = {a}, b = {b}): need finite b >= a > 0")]
    InvalidRates { a: f64, b: f64 },

    /// `a == b`: the classical telegraph process, which has no invariant law.
    #[error("degenerate rates a = b = {0}: operation needs b > a")]
    Degenerate(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sub-excursion cap of {cap} exceeded (tree too large, b <= a?)")]
    RecursionCap { cap: u64 },

    #[error("time {t} outside path domain [0, {horizon}]")]
    OutOfDomain { t: f64, horizon: f64 },

    #[error("integrand returned a non-finite value")]
    NonFinite,

    #[error("insufficient decay window: {usable} usable points, need at least 4")]
    InsufficientDecay { usable: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
