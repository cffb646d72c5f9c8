//! Numeric tolerances shared across the crate.
//!
//! Every threshold used to decide feasibility, support membership or
//! degeneracy lives in [`NumericPolicy`]. Functions that accept a policy use
//! it verbatim; the plain variants use [`NumericPolicy::default`].

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericPolicy {
    /// Relative asymmetry accepted by `SymMat`: `|A_ij - A_ji| <= sym_tol * (1 + max|A|)`.
    pub sym_tol: f64,
    /// Slack on the Fantope eigenvalue bounds `[-eps, 1 + eps]` and on `|trace - k| / k`.
    pub fantope_tol: f64,
    /// Relative tolerance on `sum_j gamma_j^+(theta) = k`.
    pub waterfill_tol: f64,
    /// A spectral gap at or below this value is treated as zero.
    pub gap_tol: f64,
    /// Orthonormality tolerance for Procrustes inputs.
    pub orthonormal_tol: f64,
    /// Diagonal threshold deciding membership in a population support set.
    pub support_tol: f64,
    /// Entries of `Sigma_JJ` at or below this magnitude have no sign.
    pub sign_zero_tol: f64,
    /// Allowed excess of `||Z||_{inf,inf}` over one.
    pub dual_tol: f64,
    /// Relative slack on the optimality gap in KKT based certificates.
    pub kkt_tol: f64,
    /// Row-norm threshold used when counting nonzero rows (`||H||_{2,0}`).
    pub row_zero_tol: f64,
    /// Maximum sweeps of the tridiagonal QL iteration per eigenvalue.
    pub eig_max_iter: usize,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        NumericPolicy {
            sym_tol: 1e-12,
            fantope_tol: 1e-8,
            waterfill_tol: 1e-10,
            gap_tol: 1e-10,
            orthonormal_tol: 1e-8,
            support_tol: 1e-10,
            sign_zero_tol: 1e-12,
            dual_tol: 1e-6,
            kkt_tol: 1e-4,
            row_zero_tol: 1e-10,
            eig_max_iter: 60,
        }
    }
}
