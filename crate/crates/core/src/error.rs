use thiserror::Error;

/// Errors produced by construction and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("polynomial degree {0} exceeds cap {1}")]
    DegreeCap(usize, usize),

    #[error("parameter pairs do not belong to the same Meixner class")]
    ClassMismatch,

    #[error("argument outside domain: {0}")]
    OutsideDomain(String),

    #[error("dimension {0} too large for enumeration (max {1})")]
    DimensionCap(usize, usize),

    #[error("quadrature did not converge within the node budget")]
    QuadratureBudget,

    #[error("rejection envelope violated: density/proposal = {ratio} > M = {envelope}")]
    EnvelopeViolation { ratio: f64, envelope: f64 },

    #[error("rejection acceptance rate {0:.4} below 1%; raise the envelope or change the proposal")]
    LowAcceptance(f64),

    #[error("dual-route disagreement: {0}")]
    RouteDisagreement(String),

    #[error("distribution functions are not similarly distributed (max deviation {0:.3e})")]
    NotSimilar(f64),

    #[error("unknown preset: {0}")]
    UnknownPreset(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
