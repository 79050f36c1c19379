use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. The variant name doubles as the
/// machine-readable error kind emitted by the command-line driver.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("illegal parameter: {0}")]
    IllegalParams(String),

    #[error("hypothesis violated: {clause}")]
    HypothesisViolated { clause: String },

    #[error("no positive equilibrium: R0 = {r0} <= 1")]
    NoPositiveEquilibrium { r0: f64 },

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("domain of {needed} nodes exceeds grid of {available} nodes")]
    DomainExceedsGrid { needed: usize, available: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("upper and lower iterates did not meet: gap {gap:e}")]
    NotUniquelyBracketed { gap: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("half-line ladder exhausted at l = {last_rung} without stabilising")]
    LadderExhausted { last_rung: f64 },

    #[error("time step {dt} exceeds stability bound {dt_stab}")]
    StabilityViolation { dt: f64, dt_stab: f64 },

    #[error("front {h} left the grid (L_max = {l_max})")]
    GridExhausted { h: f64, l_max: f64 },

    #[error("runs are not comparable: {0}")]
    IncomparableRuns(String),

    #[error("no bracket: {0}")]
    NoBracket(String),

    #[error("parse error: {0}")]
    ParseError(String),

    #[error("validation error: {0}")]
    ValidationError(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable identifier of the variant, used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::IllegalParams(_) => "IllegalParams",
            Error::HypothesisViolated { .. } => "HypothesisViolated",
            Error::NoPositiveEquilibrium { .. } => "NoPositiveEquilibrium",
            Error::BracketFailure(_) => "BracketFailure",
            Error::DomainExceedsGrid { .. } => "DomainExceedsGrid",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotUniquelyBracketed { .. } => "NotUniquelyBracketed",
            Error::PreconditionFailed(_) => "PreconditionFailed",
            Error::LadderExhausted { .. } => "LadderExhausted",
            Error::StabilityViolation { .. } => "StabilityViolation",
            Error::GridExhausted { .. } => "GridExhausted",
            Error::IncomparableRuns(_) => "IncomparableRuns",
            Error::NoBracket(_) => "NoBracket",
            Error::ParseError(_) => "ParseError",
            Error::ValidationError(_) => "ValidationError",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
