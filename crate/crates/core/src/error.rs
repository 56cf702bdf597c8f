use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of the discrete operators, functionals and time steppers.
///
/// Offending values are carried as `f64` so the error type stays independent
/// of the scalar the caller computes in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("argument {value} outside the open interval (-1, 1) in {context}")]
    OutOfDomain { context: &'static str, value: f64 },

    #[error("field mean {mean:e} is not zero (tolerance {tol:e})")]
    NonZeroMean { mean: f64, tol: f64 },

    #[error("negative concentration {0} passed to the reaction rate")]
    NegativeSigma(f64),

    #[error("nonpositive concentration {value} at cell {cell}")]
    NonpositiveSigma { cell: usize, value: f64 },

    #[error("precondition violated: {0}")]
    DomainViolation(String),

    #[error("linear solver failed: {0}")]
    SolverDiverged(String),

    #[error("Newton iteration failed after {iters} iterations (residual {residual:e})")]
    NewtonDiverged { iters: usize, residual: f64 },

    #[error("positivity lost: sigma = {value:e} at cell {cell}")]
    PositivityLost { cell: usize, value: f64 },

    #[error("time step {dt:e} too large for explicit growth rate {rate:e} (need dt * rate < 1)")]
    StepTooLarge { dt: f64, rate: f64 },

    #[error("Riccati comparison solution did not reach the cap before t = {horizon}")]
    CapNotReached { horizon: f64 },

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("run aborted: {0}")]
    RunAborted(String),
}

impl Error {
    /// Errors after which the time stepper retries with a smaller step.
    pub fn is_step_rejection(&self) -> bool {
        matches!(
            self,
            Error::NewtonDiverged { .. } | Error::StepTooLarge { .. } | Error::SolverDiverged(_)
        )
    }
}
