use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("loss of precision: {0}")]
    LossOfPrecision(String),
    #[error("contour evaluation did not converge: {0}")]
    ContourFailure(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("pole proximity: {0}")]
    PoleProximity(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("overflow converting log-domain value (log magnitude {0})")]
    Overflow(f64),
    #[error("no root in window: {0}")]
    NoRoot(String),
    #[error("estimators disagree: newton log-width {newton}, flux log-width {flux}")]
    EstimatorDisagreement { newton: f64, flux: f64 },
    #[error("iteration diverged: {0}")]
    IterationDivergence(String),
    #[error("width unresolved: |Im rho| = {0:e} below grid noise floor")]
    UnresolvedWidth(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("monte carlo variance too large: {0}")]
    MonteCarloVariance(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
