use thiserror::Error;

/// Errors raised by the simulation and estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not Hermitian (max |h - h†| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not unitary (max |UU† - I| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("finite-duration pulse needs a positive Rabi frequency (got {0})")]
    NonpositiveRabi(f64),

    #[error(
        "hyperfine splitting must be positive and A nonzero (splitting {splitting}, A {hyperfine})"
    )]
    DegenerateSplitting { splitting: f64, hyperfine: f64 },

    #[error("misclassification rate must lie in [0, 1) (got {0})")]
    InvalidRate(f64),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("density matrix has no eigenvalue pair with nonzero weight")]
    DegenerateState,

    #[error("singular Jacobian (condition number {condition:.3e})")]
    SingularJacobian { condition: f64 },

    #[error("invalid points for power-law fit: {0}")]
    InvalidPoints(String),

    #[error("optimizer did not converge in any of {restarts} restarts (best spread {spread:.3e})")]
    NonConvergence { restarts: usize, spread: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
