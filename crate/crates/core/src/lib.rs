//! Fantope projection and selection (FPS) for sparse principal subspace
//! estimation.
//!
//! The crate is organized around five pieces:
//!
//! * [`spectral`]: symmetric eigendecomposition, exact projection onto the
//!   trace-k Fantope and subspace alignment.
//! * [`solver`]: ADMM for the penalized, elastic-net and norm-constrained
//!   programs, dual recovery, KKT residuals and a uniqueness probe.
//! * [`diagnostics`]: sparsistency and persistence conditions evaluated
//!   against a known population matrix, plus a primal-dual witness builder.
//! * [`models`]: spiked, toy and planted-clique generators, Gaussian
//!   sampling and sample covariances.
//! * [`io`]: the CSV matrix format and JSON model descriptors.

pub mod diagnostics;
pub mod error;
mod linalg;
pub mod io;
pub mod models;
pub mod policy;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod support;

pub use diagnostics::{ConditionReport, WitnessReport};
pub use error::{FpsError, Result};
pub use policy::NumericPolicy;
pub use solver::{FpsSolution, KktReport, SolverConfig};
pub use spectral::{FantopePoint, FantopeProjectionResult, Spectrum, SymMat};
pub use support::SupportSet;

/// Matrix norms used by the estimator, exposed for callers and tests.
pub mod norms {
    use ndarray::ArrayView2;

    pub use crate::linalg::frobenius;

    /// `||A||_{inf,inf}`.
    pub fn max_abs(a: ArrayView2<f64>) -> f64 {
        crate::linalg::max_abs(a)
    }

    /// `||A||_{1,1}`.
    pub fn l11(a: ArrayView2<f64>) -> f64 {
        crate::linalg::l11(a)
    }

    /// `||A||_{2,inf}`: largest row Euclidean norm.
    pub fn max_row_norm(a: ArrayView2<f64>) -> f64 {
        crate::linalg::max_row_norm(a)
    }

    /// `||A||_{2,0}`: number of rows with Euclidean norm above `tol`.
    pub fn nonzero_rows(a: ArrayView2<f64>, tol: f64) -> usize {
        a.rows().into_iter().filter(|r| r.dot(r).sqrt() > tol).count()
    }

    pub fn inner(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
        crate::linalg::inner(a, b)
    }
}
