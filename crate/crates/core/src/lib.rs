//! Low-rank plus sparse drift estimation for high-dimensional Lévy-driven
//! Ornstein–Uhlenbeck processes.
//!
//! The crate covers the whole pipeline: generating ground-truth drift
//! matrices `A₀ = L₀ + S₀`, simulating `dX = −A₀X dt + dZ` under four
//! background driving Lévy regimes, building the localized and truncated
//! least-squares contrast, solving the nuclear-plus-ℓ1 penalized problem by
//! accelerated proximal gradient, and checking the certificates behind the
//! oracle inequality (dual-norm gradient bounds, restricted strong
//! convexity, error-cone membership).

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod contrast;
pub mod error;
pub mod experiment;
pub mod levy;
pub mod matrix;
pub mod model;
pub mod solver;
pub mod stats;
pub mod tolerances;

pub use error::{Error, Result};
pub use matrix::{Mat, TangentSpaces};
pub use tolerances::Tolerances;
