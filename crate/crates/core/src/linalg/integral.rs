use std::f64::consts::PI;

use num_complex::Complex64;

use super::{decompose_complex, mat_exp, CMat, ONE};
use crate::error::{Error, Result};

/// Below this `|lambda*T|` the difference quotient is replaced by a series.
const SERIES_CUTOFF: f64 = 1e-4;

/// Eigenvalue of `int_0^T e^{A t} dt` that corresponds to the eigenvalue
/// `lambda` of `A`: `(e^{lambda T} - 1) / lambda`, or `T` when `lambda = 0`.
pub fn integral_spectrum(lambda: Complex64, t: f64) -> Complex64 {
    if lambda == Complex64::new(0.0, 0.0) {
        return Complex64::new(t, 0.0);
    }
    let x = lambda * t;
    if x.norm() < SERIES_CUTOFF {
        // T * sum_{k=0}^{5} x^k / (k+1)!
        let mut term = ONE;
        let mut sum = ONE;
        for k in 1..6 {
            term = term * x / (k as f64 + 1.0);
            sum += term;
        }
        sum * t
    } else {
        (x.exp() - ONE) / lambda
    }
}

/// True when `lambda * t` lies on `2*pi*i*Z` minus the origin, i.e. when the
/// matching eigenvalue of the integral vanishes.
pub fn is_integral_singular_eigenvalue(lambda: Complex64, t: f64) -> bool {
    let x = lambda * t;
    let tol = 1e-9 * x.norm().max(1.0);
    if x.re.abs() > tol {
        return false;
    }
    let k = (x.im / (2.0 * PI)).round();
    k != 0.0 && (x.im - 2.0 * PI * k).abs() <= tol
}

/// `int_0^T e^{A tau} d tau`, read off the top-right block of the
/// exponential of the augmented matrix `T * [[A, I], [0, 0]]`.
pub fn integral_exp(a: &CMat, t: f64) -> Result<CMat> {
    if !a.is_square() {
        return Err(Error::Dimension("integral_exp needs a square matrix".into()));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidState(format!("integration horizon must be positive, got {t}")));
    }
    let n = a.nrows();
    let scale = Complex64::new(t, 0.0);
    let mut aug = CMat::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * scale));
    for i in 0..n {
        aug[(i, n + i)] = scale;
    }
    let e = mat_exp(&aug)?;
    Ok(e.view((0, n), (n, n)).into_owned())
}

/// As [`integral_exp`], but refuses when the result is singular, naming the
/// offending eigenvalue of `A`.
pub fn integral_exp_checked(a: &CMat, t: f64) -> Result<CMat> {
    let d = decompose_complex(a)?;
    if let Some(&lambda) = d.eigenvalues.iter().find(|&&l| is_integral_singular_eigenvalue(l, t)) {
        return Err(Error::IntegralSingular { eigenvalue: lambda });
    }
    integral_exp(a, t)
}
