// SPDX-License-Identifier: Apache-2.0

//! Dense complex linear-algebra kernel.
//!
//! All comparisons in the crate bottom out here and use absolute tolerances
//! on the max-entry norm. [`DEFAULT_TOL`] is the default; every routine that
//! takes a tolerance lets the caller override it.

mod eigen;
mod matrix;
pub mod sampling;

pub use eigen::{
    cholesky, general_eig, hermitian_eig, operator_norm, orthogonal_complement, orthonormal_span, peripheral_order_key,
    principal_angle_sines, singular_values, EigenBlock, EigenSystem, CLUSTER_TOL,
};
pub(crate) use eigen::{hermitian_eig_unchecked, invariant_residual};
pub use matrix::{vec_inner, vec_norm, ComplexMatrix};

pub type C64 = num_complex::Complex64;

pub const DEFAULT_TOL: f64 = 1e-9;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
