//! Dense arithmetic for desk-scale models.
//!
//! Storage is row-major `f64` with no views or strides; operations copy.

mod finite_diff;
mod linalg;
mod matrix;
mod params;

pub use finite_diff::{finite_diff_gradient, relative_l2_error, DEFAULT_FD_STEP};
pub use linalg::{cholesky, sqrtm_psd, symmetric_eigen, SymmetricEigen};
pub use matrix::{matmul, Matrix};
pub use params::{ParameterVector, Segment};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}
