use core::fmt;

/// Failure modes shared by every estimator in the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Fewer observations than the estimator needs.
    InsufficientData {
        what: &'static str,
        needed: u64,
        have: u64,
    },
    /// Predictions on the labelled set have zero sample variance, so the
    /// power-tuning coefficient is undefined.
    DegeneratePredictor,
    /// A standardized mean was requested with a zero scale.
    DegenerateScale,
    /// The labelled count exceeds the unlabelled count, so `1 - n/N < 0`.
    InvalidRatio { n: u64, big_n: u64 },
    /// An argument lies outside the documented domain.
    Domain(&'static str),
    /// Inconsistent configuration.
    Config(&'static str),
    /// A record carries a non-finite value.
    Data { index: u64, field: &'static str },
    /// Numerical integration did not reach the requested tolerance.
    Quadrature {
        z: f64,
        t: u64,
        estimate: f64,
        error: f64,
    },
}

impl Error {
    /// Coarse category, used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Domain(_) => ErrorKind::Config,
            Error::Data { .. } => ErrorKind::Data,
            Error::Quadrature { .. } => ErrorKind::Numerical,
            Error::InsufficientData { .. }
            | Error::DegeneratePredictor
            | Error::DegenerateScale
            | Error::InvalidRatio { .. } => ErrorKind::Undefined,
        }
    }
}

/// See [`Error::kind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
    /// The quantity is not defined yet for the current data (too few
    /// points, degenerate scale). Streaming callers usually skip these.
    Undefined,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InsufficientData { what, needed, have } => {
                write!(f, "insufficient data for {what}: need {needed}, have {have}")
            }
            Error::DegeneratePredictor => {
                write!(f, "degenerate predictor: labelled predictions are constant")
            }
            Error::DegenerateScale => write!(f, "degenerate scale: standard deviation is zero"),
            Error::InvalidRatio { n, big_n } => {
                write!(f, "invalid ratio: n = {n} exceeds N = {big_n}")
            }
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Data { index, field } => {
                write!(f, "data error: record {index} has a non-finite {field}")
            }
            Error::Quadrature {
                z,
                t,
                estimate,
                error,
            } => write!(
                f,
                "quadrature did not converge at z = {z}, t = {t} (estimate {estimate:e}, error {error:e})"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
