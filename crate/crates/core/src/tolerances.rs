//! Numeric tolerances shared by every module.
//!
//! Everything that compares floating-point quantities against a threshold
//! reads its value from [`Tolerances`], so a test suite in another language
//! can reproduce the same decisions from the same record.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative Frobenius error allowed when reconstructing from an SVD.
    pub svd_reconstruction: f64,
    /// Orthonormality of tangent-space bases.
    pub orthonormality: f64,
    /// A singular value counts toward the rank when `sigma > rank * sigma_max`.
    pub rank: f64,
    /// An entry counts toward a support when `|x| > support`.
    pub support: f64,
    /// Dual-norm residual accepted by the optimality certificate.
    pub certificate: f64,
    /// Denominators below this make cone ratios infinite.
    pub cone_denominator: f64,
    /// Any state coordinate above this aborts a simulation.
    pub overflow_guard: f64,
    /// Agreement between the trace and direct-sum forms of the empirical norm.
    pub empirical_norm_cross_check: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            svd_reconstruction: 1e-8,
            orthonormality: 1e-10,
            rank: 1e-8,
            support: 1e-6,
            certificate: 1e-4,
            cone_denominator: 1e-14,
            overflow_guard: 1e12,
            empirical_norm_cross_check: 1e-10,
        }
    }
}
