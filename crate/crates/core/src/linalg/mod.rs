//! Dense spectral machinery used by the converter: complex Schur based
//! eigendecomposition, the matrix exponential and principal logarithm,
//! the real-logarithm existence test and integrals of the matrix exponential.
//!
//! All matrices are small and dense (`M` up to a few dozen). Everything is
//! computed in `Complex64`; callers that start from real data convert with
//! [`to_complex`].

mod decomp;
mod expm;
mod integral;
mod logm;
mod reallog;

pub(crate) use decomp::condition_2;
pub use decomp::{decompose, decompose_complex, SpectralDecomposition, DIAGONALIZABLE_COND_LIMIT};
pub use expm::mat_exp;
pub use integral::{integral_exp, integral_exp_checked, integral_spectrum, is_integral_singular_eigenvalue};
pub use logm::{
    mat_log_principal, mat_log_principal_complex, real_log, MatrixFunctionResult, RealLogOutcome,
    PROJECTION_TOL, ROUNDTRIP_TOL,
};
pub use reallog::{real_log_exists, JordanBlockCount, RealLogKind, RealLogVerdict, CLUSTER_TOL};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

pub fn to_complex(a: &DMatrix<f64>) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn to_complex_vec(v: &DVector<f64>) -> CVec {
    v.map(|x| Complex64::new(x, 0.0))
}

/// Real part of a complex matrix together with the largest discarded
/// imaginary magnitude.
pub fn split_real(a: &CMat) -> (DMatrix<f64>, f64) {
    let max_imag = a.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()));
    (a.map(|z| z.re), max_imag)
}

pub fn split_real_vec(v: &CVec) -> (DVector<f64>, f64) {
    let max_imag = v.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()));
    (v.map(|z| z.re), max_imag)
}

/// Largest entry modulus of a complex vector.
pub fn max_abs(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute column sum.
pub fn norm_one(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_diagonal(a: &CMat) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == ZERO))
}

/// Relative Frobenius distance `||a - b|| / ||b||` (absolute when `b` is zero).
pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    let nb = frobenius(b);
    let d = frobenius(&(a - b));
    if nb > 0.0 {
        d / nb
    } else {
        d
    }
}

/// Short, stable identifier for a matrix, used in error messages.
pub fn fingerprint(a: &CMat) -> String {
    // FNV-1a over the raw bits.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for z in a.iter() {
        for bits in [z.re.to_bits(), z.im.to_bits()] {
            for b in bits.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    format!("{}x{}#{:016x}", a.nrows(), a.ncols(), h)
}

/// Principal-branch representative for eigenvalues sitting on the negative
/// real axis: a signed-zero or roundoff-sized imaginary part is replaced by
/// `+0.0` so that `ln` and `sqrt` land on the upper side of the cut.
pub(crate) fn snap_to_cut(z: Complex64) -> Complex64 {
    if z.re < 0.0 && z.im.abs() <= 64.0 * f64::EPSILON * z.norm() {
        Complex64::new(z.re, 0.0)
    } else {
        z
    }
}
