use thiserror::Error;

use crate::solver::FpsSolution;

pub type Result<T, E = FpsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FpsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigensolver failed to converge after {iterations} iterations")]
    NumericalFailure { iterations: usize },

    /// The iteration budget ran out. The partial solution is kept so callers
    /// can inspect residuals or decide to accept it anyway.
    #[error(
        "ADMM did not converge in {} iterations (primal {:.3e}, dual {:.3e})",
        .0.iters, .0.primal_residual, .0.dual_residual
    )]
    NotConverged(Box<FpsSolution>),

    #[error("constraint radius {radius} is below the trace bound k = {k}")]
    InfeasibleConstraint { radius: f64, k: usize },

    /// The penalty search could not bracket the constraint. `trace` holds every
    /// evaluated `(rho, ||H||_{1,1})` pair in evaluation order.
    #[error("penalty search failed after {} evaluations", .trace.len())]
    SearchFailure { trace: Vec<(f64, f64)> },

    #[error("spectral gap {gap:.3e} at k is not positive")]
    SpsViolated { gap: f64 },

    #[error("empirical gap {gap:.3e} of S - rho Z collapsed; uniqueness cannot be certified")]
    GapCollapsed { gap: f64 },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl FpsError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FpsError::InvalidInput(msg.into())
    }
}
