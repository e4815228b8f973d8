//! Small dense complex matrix helpers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn czero(d: usize) -> CMat {
    CMat::zeros(d, d)
}

pub fn cidentity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// `(A + A^*)/2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Eigenvalues of the Hermitian part, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let h = hermitian_part(a);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_hermitian_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigenvalues(a)[0]
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    a.clone().singular_values().iter().copied().collect()
}

/// Spectral norm.
pub fn op_norm(a: &CMat) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

pub fn min_singular_value(a: &CMat) -> f64 {
    singular_values(a).into_iter().fold(f64::INFINITY, f64::min)
}

/// Largest entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(a: &CMat, tol: f64) -> bool {
    max_abs(&(a - a.adjoint())) <= tol * max_abs(a).max(1e-300)
}

/// `2-norm condition number`.
pub fn condition_number(a: &CMat) -> f64 {
    let sv = singular_values(a);
    let hi = sv.iter().copied().fold(0.0, f64::max);
    let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

pub fn real_matrix(rows: &[&[f64]]) -> CMat {
    let d = rows.len();
    CMat::from_fn(d, rows[0].len(), |i, j| Complex64::new(rows[i][j], 0.0))
}
