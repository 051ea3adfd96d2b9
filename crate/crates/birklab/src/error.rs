//! Shared error type. Exit-code mapping for the CLI lives here so the
//! library and binary agree on it.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-asserted precondition failed a runtime probe.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An orbit left the branch interiors before the requested length.
    #[error("orbit terminated after {survived} of {requested} steps")]
    OrbitTerminated { survived: usize, requested: usize },

    /// Working precision ran out before the requested digits were certified.
    #[error("precision exhausted: certified {certified} digits, requested {requested}")]
    PrecisionExhausted { certified: usize, requested: usize },

    /// Fewer continued-fraction digits available than requested.
    #[error("insufficient digits: have {have}, need {need}")]
    InsufficientDigits { have: usize, need: usize },

    /// Argument outside the computable window (e.g. α not in the range of −P′).
    #[error("out of computable range: {0}")]
    Range(String),

    /// Eigensolve or refinement failure in the pressure stack.
    #[error("solver failure: {0}")]
    Solver(String),

    /// Two independent computation routes disagree beyond tolerance.
    #[error("consistency failure: {0}")]
    Consistency(String),

    /// A series tail could not be certified (e.g. I(ε) ≤ 0).
    #[error("tail certification failure: {0}")]
    TailCertification(String),

    /// Sampling integrity violated (e.g. abnormal orbit-termination rate).
    #[error("sampling integrity failure: {0}")]
    Integrity(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code for the CLI: 2 for configuration problems,
    /// 3 for solver/certification failures, 4 for cache corruption.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Cache(_) => 4,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}
