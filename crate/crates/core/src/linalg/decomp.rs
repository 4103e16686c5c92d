use std::cmp::Ordering;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use super::{fingerprint, frobenius, is_finite, to_complex, CMat, CVec, ONE, ZERO};
use crate::error::{Error, Result};

/// Eigenvector matrices with a 2-norm condition number at or above this
/// value are treated as defective: `1 / (1e3 * machine epsilon)`.
pub const DIAGONALIZABLE_COND_LIMIT: f64 = 1.0 / (1e3 * f64::EPSILON);

/// Complex Schur factorization plus eigenvalues and unit-norm eigenvectors.
///
/// `eigenvalues` are sorted by real part, then imaginary part, then original
/// position on the Schur diagonal; `eigenvectors` columns follow that order.
/// `schur_q * schur_t * schur_q^H` reconstructs the input.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: CVec,
    pub eigenvectors: CMat,
    pub is_diagonalizable: bool,
    pub condition_estimate: f64,
    pub schur_t: CMat,
    pub schur_q: CMat,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Smallest eigenvalue magnitude.
    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
    }

    /// Inverse of the eigenvector matrix, if it is numerically invertible.
    pub fn eigenvectors_inverse(&self) -> Option<CMat> {
        self.eigenvectors.clone().try_inverse()
    }
}

pub fn decompose(a: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    decompose_complex(&to_complex(a))
}

pub fn decompose_complex(a: &CMat) -> Result<SpectralDecomposition> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "decomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_finite(a) {
        return Err(Error::InvalidState(format!(
            "non-finite entry in matrix {}",
            fingerprint(a)
        )));
    }
    let n = a.nrows();
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000).ok_or_else(|| Error::Decomposition {
        fingerprint: fingerprint(a),
    })?;
    let (q, mut t) = schur.unpack();
    // The factor is triangular in exact arithmetic; clear roundoff below the diagonal.
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = ZERO;
        }
    }

    let x = triangular_eigenvectors(&t);
    let mut v = &q * x;
    for mut col in v.column_iter_mut() {
        let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            col /= Complex64::new(nrm, 0.0);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (t[(i, i)], t[(j, j)]);
        a.re.partial_cmp(&b.re)
            .unwrap_or(Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
            .then(i.cmp(&j))
    });
    let eigenvalues = CVec::from_iterator(n, order.iter().map(|&i| t[(i, i)]));
    let eigenvectors = CMat::from_fn(n, n, |r, c| v[(r, order[c])]);

    let condition_estimate = condition_2(&eigenvectors);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        is_diagonalizable: condition_estimate < DIAGONALIZABLE_COND_LIMIT,
        condition_estimate,
        schur_t: t,
        schur_q: q,
    })
}

/// Eigenvectors of an upper-triangular matrix by back substitution. Column
/// `k` belongs to `t[(k, k)]`. Zero pivots from repeated eigenvalues are
/// replaced by a roundoff-sized value, so a defective block shows up as a
/// pair of nearly parallel columns.
fn triangular_eigenvectors(t: &CMat) -> CMat {
    let n = t.nrows();
    let smin = (f64::EPSILON * frobenius(t)).max(f64::MIN_POSITIVE);
    let mut x = CMat::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        x[(k, k)] = ONE;
        for j in (0..k).rev() {
            let mut acc = ZERO;
            for l in (j + 1)..=k {
                acc += t[(j, l)] * x[(l, k)];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < smin {
                denom = Complex64::new(smin, 0.0);
            }
            x[(j, k)] = -acc / denom;
        }
        // Rescale to keep entries bounded when pivots were tiny.
        let big = (0..=k).map(|r| x[(r, k)].norm()).fold(0.0, f64::max);
        if big > 1e100 {
            for r in 0..=k {
                x[(r, k)] /= big;
            }
        }
    }
    x
}

/// 2-norm condition number from the singular values.
pub(crate) fn condition_2(a: &CMat) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
