//! Principal matrix logarithm and a best-effort real logarithm.
//!
//! The principal logarithm is computed from the eigendecomposition when the
//! eigenvector matrix is well conditioned, and otherwise from the complex
//! Schur form by inverse scaling and squaring: repeated triangular square
//! roots until `||T^(1/2^s) - I||_1 <= 0.25`, then an 8-node Gauss-Legendre
//! (equivalently [8/8] Padé) approximant of `log(I + X)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::reallog::{negative_real_clusters, real_log_exists, RealLogKind, CLUSTER_TOL};
use super::{
    decompose_complex, frobenius, mat_exp, norm_one, rel_diff, snap_to_cut, split_real, to_complex, CMat,
    SpectralDecomposition, ZERO,
};
use crate::error::{Error, Result};

/// `||exp(log A) - A||_F / ||A||_F` must not exceed this.
pub const ROUNDTRIP_TOL: f64 = 1e-10;
/// Imaginary parts up to this fraction of `||log A||_F` are discarded for real input.
pub const PROJECTION_TOL: f64 = 1e-9;
/// Eigenvalues below this fraction of `||A||_F` in magnitude count as zero.
const SINGULAR_TOL: f64 = 1e-12;
/// Eigendecomposition is trusted for the logarithm below this eigenvector condition number.
const DIAG_PATH_COND: f64 = 1e6;
const SQRT_THRESHOLD: f64 = 0.25;
const MAX_SQRTS: usize = 100;
const QUAD_NODES: usize = 8;

#[derive(Debug, Clone)]
pub struct MatrixFunctionResult {
    pub value: CMat,
    /// Largest imaginary magnitude seen before any projection.
    pub max_imag: f64,
    /// The stored value is exactly real.
    pub was_projected_real: bool,
    /// Achieved `||exp(value) - A||_F / ||A||_F`.
    pub roundtrip_residual: f64,
}

impl MatrixFunctionResult {
    pub fn real(&self) -> Option<DMatrix<f64>> {
        self.was_projected_real.then(|| self.value.map(|z| z.re))
    }
}

/// Outcome of [`real_log`].
#[derive(Debug, Clone)]
pub enum RealLogOutcome {
    Real { value: DMatrix<f64>, roundtrip_residual: f64 },
    /// No real logarithm was produced; the principal (complex) one is attached.
    Declined { reason: String, principal: MatrixFunctionResult },
}

/// Principal logarithm of a real matrix. The result is projected to a real
/// matrix when its imaginary part is negligible.
pub fn mat_log_principal(a: &DMatrix<f64>) -> Result<MatrixFunctionResult> {
    log_impl(&to_complex(a), true)
}

/// Principal logarithm of a complex matrix. No projection is applied.
pub fn mat_log_principal_complex(a: &CMat) -> Result<MatrixFunctionResult> {
    log_impl(a, false)
}

fn log_impl(a: &CMat, project: bool) -> Result<MatrixFunctionResult> {
    let d = decompose_complex(a)?;
    let norm = frobenius(a);
    let min_abs = d.min_abs_eigenvalue();
    if min_abs <= SINGULAR_TOL * norm {
        return Err(Error::Singular {
            min_abs_eigenvalue: min_abs,
        });
    }

    let mut best: Option<(MatrixFunctionResult, f64)> = None;
    if d.is_diagonalizable && d.condition_estimate <= DIAG_PATH_COND {
        if let Some(l) = log_via_eigen(&d) {
            let r = finish(l, a, project)?;
            if r.roundtrip_residual <= ROUNDTRIP_TOL {
                return Ok(r);
            }
            let res = r.roundtrip_residual;
            best = Some((r, res));
        }
    }

    let l = &d.schur_q * log_triangular(&d.schur_t)? * d.schur_q.adjoint();
    let r = finish(l, a, project)?;
    if r.roundtrip_residual <= ROUNDTRIP_TOL {
        return Ok(r);
    }
    let residual = match best {
        Some((_, res)) => res.min(r.roundtrip_residual),
        None => r.roundtrip_residual,
    };
    Err(Error::Accuracy {
        what: "matrix logarithm round trip".into(),
        residual,
        tolerance: ROUNDTRIP_TOL,
    })
}

fn finish(l: CMat, a: &CMat, project: bool) -> Result<MatrixFunctionResult> {
    let (re, max_imag) = split_real(&l);
    let projected = project && max_imag <= PROJECTION_TOL * frobenius(&l);
    let value = if projected { to_complex(&re) } else { l };
    let roundtrip_residual = rel_diff(&mat_exp(&value)?, a);
    Ok(MatrixFunctionResult {
        value,
        max_imag,
        was_projected_real: projected,
        roundtrip_residual,
    })
}

fn log_via_eigen(d: &SpectralDecomposition) -> Option<CMat> {
    let vinv = d.eigenvectors_inverse()?;
    let logs = d.eigenvalues.map(|z| snap_to_cut(z).ln());
    Some(&d.eigenvectors * CMat::from_diagonal(&logs) * vinv)
}

/// Principal logarithm of an upper-triangular matrix with no eigenvalue on
/// the closed negative real axis other than the cut itself (which is taken
/// from above).
pub(crate) fn log_triangular(t: &CMat) -> Result<CMat> {
    let n = t.nrows();
    let mut r = t.clone();
    for i in 0..n {
        r[(i, i)] = snap_to_cut(r[(i, i)]);
    }
    let eye = CMat::identity(n, n);
    let mut s = 0usize;
    while norm_one(&(&r - &eye)) > SQRT_THRESHOLD {
        if s >= MAX_SQRTS {
            return Err(Error::Accuracy {
                what: "inverse scaling: square-root count".into(),
                residual: norm_one(&(&r - &eye)),
                tolerance: SQRT_THRESHOLD,
            });
        }
        r = sqrt_triangular(&r);
        s += 1;
    }
    let x = &r - &eye;
    let mut l = log1p_quadrature(&x)? * Complex64::new(2f64.powi(s as i32), 0.0);
    for i in 0..n {
        l[(i, i)] = snap_to_cut(t[(i, i)]).ln();
    }
    Ok(l)
}

/// Principal square root of an upper-triangular matrix (Björck-Hammarling recurrence).
fn sqrt_triangular(t: &CMat) -> CMat {
    let n = t.nrows();
    let mut r = CMat::zeros(n, n);
    for j in 0..n {
        r[(j, j)] = t[(j, j)].sqrt();
        for i in (0..j).rev() {
            let mut acc = t[(i, j)];
            for k in (i + 1)..j {
                acc -= r[(i, k)] * r[(k, j)];
            }
            let denom = r[(i, i)] + r[(j, j)];
            r[(i, j)] = if denom == ZERO { ZERO } else { acc / denom };
        }
    }
    r
}

/// `log(I + X) = int_0^1 X (I + tX)^{-1} dt` by Gauss-Legendre quadrature.
fn log1p_quadrature(x: &CMat) -> Result<CMat> {
    let n = x.nrows();
    let eye = CMat::identity(n, n);
    let mut acc = CMat::zeros(n, n);
    for (node, weight) in gauss_legendre_unit(QUAD_NODES) {
        let m = &eye + x * Complex64::new(node, 0.0);
        let y = m.lu().solve(x).ok_or_else(|| Error::Accuracy {
            what: "log quadrature: singular shifted matrix".into(),
            residual: f64::INFINITY,
            tolerance: 0.0,
        })?;
        acc += y * Complex64::new(weight, 0.0);
    }
    Ok(acc)
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
fn gauss_legendre_unit(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 1..=m {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((x + 1.0) / 2.0, w / 2.0));
    }
    out
}

/// `(P_m(x), P_m'(x))`.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A real logarithm of `a` when one exists and can be assembled.
///
/// When the principal logarithm is already real it is returned. Otherwise,
/// for diagonalizable matrices whose negative eigenvalues all have even
/// multiplicity, each negative eigenspace is split off and given the
/// rotation-block logarithm `ln|lambda| I + pi J`. Defective negative
/// eigenvalues are declined.
pub fn real_log(a: &DMatrix<f64>) -> Result<RealLogOutcome> {
    let principal = mat_log_principal(a)?;
    if let Some(value) = principal.real() {
        return Ok(RealLogOutcome::Real {
            value,
            roundtrip_residual: principal.roundtrip_residual,
        });
    }
    let verdict = real_log_exists(a);
    if verdict.kind != RealLogKind::Yes {
        return Ok(RealLogOutcome::Declined {
            reason: verdict.explanation,
            principal,
        });
    }
    if verdict.blocks.iter().any(|b| b.size > 1) {
        return Ok(RealLogOutcome::Declined {
            reason: "negative eigenvalue with Jordan blocks larger than 1x1; block pairing is not implemented".into(),
            principal,
        });
    }
    match real_log_deflate(a, 0) {
        Some(value) => {
            let residual = rel_diff(&mat_exp(&to_complex(&value))?, &to_complex(a));
            if residual <= ROUNDTRIP_TOL {
                Ok(RealLogOutcome::Real {
                    value,
                    roundtrip_residual: residual,
                })
            } else {
                Ok(RealLogOutcome::Declined {
                    reason: format!("assembled real logarithm misses the round trip ({residual:e})"),
                    principal,
                })
            }
        }
        None => Ok(RealLogOutcome::Declined {
            reason: "negative eigenspaces could not be separated numerically".into(),
            principal,
        }),
    }
}

fn real_log_deflate(a: &DMatrix<f64>, depth: usize) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let d = decompose_complex(&to_complex(a)).ok()?;
    let tol = CLUSTER_TOL * a.norm();
    let clusters = negative_real_clusters(&d.eigenvalues, tol);
    let Some(&(lambda, mult)) = clusters.first() else {
        return mat_log_principal(a).ok()?.real();
    };
    if mult % 2 != 0 || depth > n {
        return None;
    }
    let shifted = a - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    // Singular values come sorted in decreasing order.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());
    let rank = n - mult;
    let range: Vec<_> = idx[..rank].iter().map(|&i| u.column(i).into_owned()).collect();
    let null: Vec<_> = idx[rank..].iter().map(|&i| v_t.row(i).transpose()).collect();
    let cols: Vec<_> = null.into_iter().chain(range).collect();
    let s = DMatrix::from_columns(&cols);
    let s_inv = s.clone().try_inverse()?;
    let b = &s_inv * a * &s;
    let rest = b.view((mult, mult), (rank, rank)).into_owned();
    let rest_log = real_log_deflate(&rest, depth + 1)?;

    let mut block = DMatrix::zeros(n, n);
    let ln = lambda.abs().ln();
    for p in 0..mult / 2 {
        let (i, j) = (2 * p, 2 * p + 1);
        block[(i, i)] = ln;
        block[(j, j)] = ln;
        block[(i, j)] = std::f64::consts::PI;
        block[(j, i)] = -std::f64::consts::PI;
    }
    block.view_mut((mult, mult), (rank, rank)).copy_from(&rest_log);
    Some(&s * block * s_inv)
}
