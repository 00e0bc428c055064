use thiserror::Error;

/// Errors surfaced by the crane simulation and control stack.
#[derive(Debug, Error)]
pub enum CraneError {
    /// Plant state left the validity region of the model (swing angle near
    /// +/- pi/2 or rope length at/below the minimum).
    #[error("plant state out of domain: {0}")]
    StateOutOfDomain(String),

    #[error("singular mass matrix in acceleration solve")]
    SingularMassMatrix,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("axis discretizations have mismatched sample times")]
    MismatchedSampleTime,

    #[error("numerical breakdown in RLS update: {0}")]
    NumericalBreakdown(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// QP constraint set has no feasible point.
    #[error("QP infeasible")]
    Infeasible,

    #[error("QP iteration limit reached")]
    MaxIterations,

    #[error("near-singular swing geometry matrix: det = {0:.3e}")]
    NearSingularH(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CraneError>;
