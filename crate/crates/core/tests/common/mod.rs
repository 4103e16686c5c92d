//! Reference implementations used as oracles. None of these call into the
//! library's linear algebra.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use plrnn_ct::model::PlrnnModel;
use rand::Rng;

pub type CMat = DMatrix<Complex64>;

/// `A z + W relu(z) + h`, written out entry by entry.
pub fn naive_step(a: &[f64], w: &DMatrix<f64>, h: &[f64], z: &[f64]) -> Vec<f64> {
    let m = z.len();
    (0..m)
        .map(|i| {
            let mut acc = a[i] * z[i] + h[i];
            for j in 0..m {
                acc += w[(i, j)] * z[j].max(0.0);
            }
            acc
        })
        .collect()
}

pub fn naive_orbit(model: &PlrnnModel, z0: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let a: Vec<f64> = model.a_diag().iter().copied().collect();
    let h: Vec<f64> = model.h().iter().copied().collect();
    let mut out = vec![z0.to_vec()];
    for _ in 0..steps {
        let next = naive_step(&a, model.w(), &h, out.last().unwrap());
        out.push(next);
    }
    out
}

/// `A + W diag(d)` for the sign pattern encoded in `ordinal` (bit i is unit i).
pub fn naive_region_matrix(model: &PlrnnModel, ordinal: u64) -> DMatrix<f64> {
    let m = model.dim();
    DMatrix::from_fn(m, m, |i, j| {
        let d = if (ordinal >> j) & 1 == 1 { 1.0 } else { 0.0 };
        let a = if i == j { model.a_diag()[i] } else { 0.0 };
        a + model.w()[(i, j)] * d
    })
}

/// `e^A` by a 40-term Taylor series after scaling to norm below 1/2.
pub fn taylor_expm(a: &CMat) -> CMat {
    let m = a.nrows();
    let norm = a.iter().map(|z| z.norm()).sum::<f64>();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let x = a / Complex64::new(2f64.powi(s), 0.0);
    let mut term = CMat::identity(m, m);
    let mut sum = term.clone();
    for k in 1..40 {
        term = &term * &x / Complex64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `int_0^t e^{A tau} d tau` by the series `sum t^{k+1} A^k / (k+1)!` over
/// `2^s` sub-intervals combined with `B(2u) = B(u) (I + e^{A u})`.
pub fn taylor_integral(a: &CMat, t: f64) -> CMat {
    let m = a.nrows();
    let norm = a.iter().map(|z| z.norm()).sum::<f64>() * t;
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let u = t / 2f64.powi(s);
    let au = a * Complex64::new(u, 0.0);
    let mut term = CMat::identity(m, m) * Complex64::new(u, 0.0);
    let mut b = term.clone();
    let mut pow = CMat::identity(m, m);
    let mut e = pow.clone();
    for k in 1..40 {
        term = &term * &au / Complex64::new((k + 1) as f64, 0.0);
        b += &term;
        pow = &pow * &au / Complex64::new(k as f64, 0.0);
        e += &pow;
    }
    for _ in 0..s {
        b = &b + &b * &e;
        e = &e * &e;
    }
    b
}

pub fn to_c(a: &DMatrix<f64>) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn rel_frobenius(a: &CMat, b: &CMat) -> f64 {
    let num: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Classic fourth-order Runge-Kutta for `x' = W x + h`.
pub fn rk4_affine(w: &DMatrix<f64>, h: &DVector<f64>, x0: &DVector<f64>, dt: f64, steps: usize) -> Vec<DVector<f64>> {
    let f = |x: &DVector<f64>| w * x + h;
    let mut out = vec![x0.clone()];
    let mut x = x0.clone();
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (dt / 2.0)));
        let k3 = f(&(&x + &k2 * (dt / 2.0)));
        let k4 = f(&(&x + &k3 * dt));
        x = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        out.push(x.clone());
    }
    out
}

fn spectrum_ok(w: &DMatrix<f64>) -> bool {
    w.complex_eigenvalues().iter().all(|l| {
        let r = l.norm();
        (0.05..=5.0).contains(&r) && (l - Complex64::new(1.0, 0.0)).norm() >= 1e-3
    })
}

/// Model of dimension `m` whose every region spectrum lies in `[0.05, 5]` in
/// magnitude and at least `1e-3` away from 1, by rejection sampling.
pub fn random_model<R: Rng>(rng: &mut R, m: usize) -> PlrnnModel {
    let sigma = 0.6 / (m as f64).sqrt();
    loop {
        let a = DVector::from_fn(m, |_, _| {
            let mag = rng.gen_range(0.2..0.95);
            if rng.gen_bool(0.2) {
                -mag
            } else {
                mag
            }
        });
        let w = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-sigma..sigma));
        let h = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let model = PlrnnModel::new(a, w, h, 1.0, None).unwrap();
        if (0..1u64 << m).all(|k| spectrum_ok(&naive_region_matrix(&model, k))) {
            return model;
        }
    }
}
