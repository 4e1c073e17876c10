use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("non-finite numeric input: {0}")]
    NumericInput(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid model specification: {0}")]
    InvalidModel(String),

    /// Ψ = I − B₀ is singular or too ill-conditioned to invert.
    #[error("assumption [E] violated: I - B0 has condition number {condition:.3e}")]
    AssumptionE { condition: f64 },

    /// The Jacobian of vech Σ(θ) does not have full column rank.
    #[error("assumption [H] violated: Jacobian rank {rank} < q = {q}")]
    AssumptionH { rank: usize, q: usize },

    #[error("model-implied covariance is not positive definite")]
    NonPdModel,

    #[error("simulation diverged in block `{block}` at step {step}")]
    SimulationDiverged { block: String, step: usize },

    #[error("inconsistent configuration: {0}")]
    ConfigInconsistency(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no start point produced a positive definite model covariance")]
    NoFeasibleStart,

    #[error("realized covariance is singular; the likelihood-ratio test requires Q_XX > 0")]
    SingularQ,

    #[error("saturated model: degrees of freedom {df} <= 0")]
    Saturated { df: i64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
