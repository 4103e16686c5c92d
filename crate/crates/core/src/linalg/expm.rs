//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13 (Higham 2005).

use num_complex::Complex64;

use super::{fingerprint, is_diagonal, is_finite, norm_one, CMat};
use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
];
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `e^A` for a square complex matrix.
///
/// Diagonal input is exponentiated entrywise.
pub fn mat_exp(a: &CMat) -> Result<CMat> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_finite(a) {
        return Err(Error::InvalidState(format!("non-finite entry in {}", fingerprint(a))));
    }
    let n = a.nrows();
    if is_diagonal(a) {
        let out = CMat::from_diagonal(&a.diagonal().map(|z| z.exp()));
        return check_overflow(out, a);
    }

    let norm = norm_one(a);
    for &(m, theta) in &THETA {
        if norm <= theta {
            let (u, v) = pade_low(a, m);
            return check_overflow(solve_pade(&u, &v, a)?, a);
        }
    }

    let mut s = 0_i32;
    if norm > THETA_13 {
        s = (norm / THETA_13).log2().ceil() as i32;
    }
    if s > 1023 {
        return Err(Error::Overflow {
            step: 0,
            detail: format!("matrix exponential of {} (1-norm {norm:e})", fingerprint(a)),
        });
    }
    let scaled = a * c(2f64.powi(-s));
    let (u, v) = pade13(&scaled, n);
    let mut r = solve_pade(&u, &v, a)?;
    for _ in 0..s {
        r = &r * &r;
    }
    check_overflow(r, a)
}

fn check_overflow(r: CMat, a: &CMat) -> Result<CMat> {
    if is_finite(&r) {
        Ok(r)
    } else {
        Err(Error::Overflow {
            step: 0,
            detail: format!("matrix exponential of {} overflowed", fingerprint(a)),
        })
    }
}

fn solve_pade(u: &CMat, v: &CMat, a: &CMat) -> Result<CMat> {
    let p = v + u;
    let q = v - u;
    q.lu().solve(&p).ok_or_else(|| Error::Overflow {
        step: 0,
        detail: format!("singular Padé denominator for {}", fingerprint(a)),
    })
}

fn pade_low(a: &CMat, m: usize) -> (CMat, CMat) {
    let n = a.nrows();
    let b: &[f64] = match m {
        3 => &B3,
        5 => &B5,
        7 => &B7,
        _ => &B9,
    };
    let eye = CMat::identity(n, n);
    let a2 = a * a;
    // Even powers A^0, A^2, A^4, ...
    let mut pows = vec![eye, a2.clone()];
    while pows.len() <= m / 2 {
        let next = pows.last().unwrap() * &a2;
        pows.push(next);
    }
    let mut u_inner = CMat::zeros(n, n);
    let mut v = CMat::zeros(n, n);
    for k in 0..=(m / 2) {
        u_inner += &pows[k] * c(b[2 * k + 1]);
        v += &pows[k] * c(b[2 * k]);
    }
    (a * u_inner, v)
}

fn pade13(a: &CMat, n: usize) -> (CMat, CMat) {
    let b = &B13;
    let eye = CMat::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]);
    let u_inner = &a6 * u_hi + &a6 * c(b[7]) + &a4 * c(b[5]) + &a2 * c(b[3]) + &eye * c(b[1]);
    let u = a * u_inner;
    let v_hi = &a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]);
    let v = &a6 * v_hi + &a6 * c(b[6]) + &a4 * c(b[4]) + &a2 * c(b[2]) + &eye * c(b[0]);
    (u, v)
}
