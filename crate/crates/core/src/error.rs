use thiserror::Error;

/// Errors surfaced by the geometry, problem, iteration and diagnostics layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is infeasible for the region ({detail})")]
    Infeasible { detail: String },

    #[error("unsupported regularizer/region pairing: {0}")]
    UnsupportedPairing(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("genericity violation: {0}")]
    Genericity(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("uniform sampler exhausted: {0}")]
    SamplerExhausted(String),

    #[error("unsupported cone query: {0}")]
    UnsupportedCone(String),

    #[error("integrator blow-up: non-finite state at t = {t}")]
    IntegratorBlowUp { t: f64 },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
