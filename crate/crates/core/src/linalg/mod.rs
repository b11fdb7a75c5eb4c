//! Dense symmetric linear algebra.

mod cholesky;
mod eigen;
mod matrix;

pub use cholesky::cholesky;
pub use eigen::{
    generalized_symmetric_eigen, symmetric_eigen, EigenDecomposition, MAX_SWEEPS,
    OFF_DIAGONAL_TOLERANCE,
};
pub use matrix::{dot, norm, Matrix};

/// Relative asymmetry tolerated before a "symmetric" input is rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
