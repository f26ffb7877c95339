use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain too small: need half-width {needed}, have {available}")]
    DomainTooSmall { needed: f64, available: f64 },

    #[error("incompatible grid spacing: {0}")]
    IncompatibleSpacing(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("malformed Bloch family: {0}")]
    MalformedFamily(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("Fourier truncation too small: L = {0}, need L >= 1")]
    TruncationTooSmall(usize),

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian (reciprocal pivot ratio {0:e})")]
    SingularJacobian(f64),

    #[error("sequence periods are not strictly increasing")]
    NotIncreasing,

    #[error("schedule entry n = {n} needs half-width {needed}, line domain has {available}")]
    ScheduleExceedsDomain { n: usize, needed: f64, available: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
