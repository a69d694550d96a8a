use thiserror::Error;

/// Failure modes shared across the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("quadrature did not converge: achieved error {achieved:.3e} > requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("scaling undefined at t = {t}: sup q^U = {sup_qu:.6e} < 1/t")]
    ScalingUndefined { t: f64, sup_qu: f64 },

    #[error("condition A1 not verified: {0}")]
    ConditionA1(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("frequency cutoff unreachable within probe budget (t q(xi) = {reached:.3e} at xi = {xi:.3e})")]
    CutoffUnreachable { xi: f64, reached: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("incompatible grids: {0}")]
    GridMismatch(String),

    /// `diagnostics` holds the series diagnostics as JSON.
    #[error("series did not contract: ratio {ratio:.4} at k = {k}")]
    NonConvergence { k: usize, ratio: f64, diagnostics: String },

    #[error("regime mismatch: {0}")]
    Regime(String),

    #[error("small-jump cutoff too small: jump rate {rate:.3e} exceeds budget; try cutoff >= {suggested:.3e}")]
    CutoffTooSmall { rate: f64, suggested: f64 },

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
