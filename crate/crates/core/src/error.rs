use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: need d >= 2")]
    InvalidDimension(usize),

    #[error("{what} = {value} out of range {lo}..={hi}")]
    OutOfRange {
        what: &'static str,
        value: usize,
        lo: usize,
        hi: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not normalized: {what} sums to {sum}")]
    NotNormalized { what: String, sum: f64 },

    #[error("negative probability {value} in {what}")]
    NegativeProbability { what: String, value: f64 },

    #[error("missing setting pair (A={a}, B={b})")]
    MissingSlice { a: usize, b: usize },

    #[error("empty slice (A={a}, B={b}): no counts")]
    EmptySlice { a: usize, b: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what}: {count} exceeds the guard of {guard}")]
    TooLarge {
        what: &'static str,
        count: u128,
        guard: u128,
    },

    #[error("box is signaling ({0} violations)")]
    Signaling(usize),

    #[error("cannot concentrate: amplitude {index} is zero")]
    ZeroAmplitude { index: usize },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
