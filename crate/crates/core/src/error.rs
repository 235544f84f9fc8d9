//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("p must be a positive integer")]
    InvalidP,

    #[error("p = {0} exceeds 2^53 and is not exactly representable")]
    PTooLarge(u64),

    #[error("unsupported zeta exponent s = {0}, supported range is 2..=6")]
    UnsupportedExponent(u32),

    #[error("tolerance must be positive, got {0:e}")]
    NonPositiveTolerance(f64),

    #[error("tolerance {tol:e} is below the achievable floor {floor:e} (4 ulps of the result)")]
    UnachievablePrecision { tol: f64, floor: f64 },

    #[error("tail tolerance {tail_tol:e} unachievable with this policy, achieved bound {achieved:e}")]
    TailBoundExceeded { tail_tol: f64, achieved: f64 },

    #[error("invalid truncation policy: {0}")]
    InvalidPolicy(String),

    #[error("non-finite sample f({x}) = {value}")]
    NonFiniteSample { x: f64, value: f64 },

    #[error("non-finite intermediate in {0}")]
    NonFinite(&'static str),

    #[error("interval endpoints out of order: lo = {lo} > hi = {hi}")]
    IntervalOrder { lo: f64, hi: f64 },

    #[error("grid must be sorted and contained in [0, 1]")]
    InvalidGrid,

    #[error("degree must be at least 2, got {0}")]
    DegreeTooSmall(usize),

    #[error("samples must be at least 1")]
    NoSamples,

    #[error("workers must be at least 1")]
    NoWorkers,

    #[error("n_max must be at least {need}, got {got}")]
    NMaxTooSmall { need: u32, got: u32 },

    #[error("fit window too small: {usable} usable iterates, need at least 2")]
    FitWindowTooSmall { usable: usize },

    #[error("direct recursion is supported only for n <= 3, got {0}")]
    RecursionDepth(u32),

    #[error("NaN input")]
    NanInput,
}

pub type Result<T> = std::result::Result<T, Error>;
