//! Existence test for a real logarithm of a real matrix: the matrix must be
//! invertible and, for every negative real eigenvalue, Jordan blocks of each
//! size must come in pairs.
//!
//! Jordan structure is read from the kernel dimensions of `(A - lambda I)^j`
//! at each numerically clustered negative eigenvalue.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use num_complex::Complex64;

use super::{decompose, CVec};

/// Eigenvalues closer than this fraction of `||A||_F` are merged.
pub const CLUSTER_TOL: f64 = 1e-8;
const SINGULAR_TOL: f64 = 1e-12;
/// Singular values within this factor of a rank threshold make the decision fragile.
const FRAGILE_FACTOR: f64 = 100.0;
/// Widest grouping tolerance, as a fraction of `||A||_F`.
const WIDEST_LINKAGE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealLogKind {
    Yes,
    No,
    NoSingular,
}

/// Number of Jordan blocks of one size at one negative eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanBlockCount {
    pub eigenvalue: f64,
    pub size: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealLogVerdict {
    pub kind: RealLogKind,
    pub explanation: String,
    /// Absolute clustering / rank tolerance that was applied.
    pub tolerance: f64,
    pub blocks: Vec<JordanBlockCount>,
}

pub fn real_log_exists(a: &DMatrix<f64>) -> RealLogVerdict {
    let n = a.nrows();
    let norm = a.norm();
    let tol = CLUSTER_TOL * norm;
    let verdict = |kind, explanation: String, blocks| RealLogVerdict {
        kind,
        explanation,
        tolerance: tol,
        blocks,
    };
    if !a.is_square() || !a.iter().all(|x| x.is_finite()) {
        return verdict(RealLogKind::No, "input is not a finite square matrix".into(), vec![]);
    }
    if n == 0 {
        return verdict(RealLogKind::Yes, "empty matrix".into(), vec![]);
    }

    let sv = a.clone().svd(false, false).singular_values;
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if norm == 0.0 || smin <= SINGULAR_TOL * norm {
        return verdict(
            RealLogKind::NoSingular,
            format!("matrix is singular (smallest singular value {smin:e})"),
            vec![],
        );
    }
    let d = match decompose(a) {
        Ok(d) => d,
        Err(e) => return verdict(RealLogKind::No, format!("eigendecomposition failed: {e}"), vec![]),
    };
    let min_abs = d.min_abs_eigenvalue();
    if min_abs <= SINGULAR_TOL * norm {
        return verdict(
            RealLogKind::NoSingular,
            format!("eigenvalue of magnitude {min_abs:e} is numerically zero"),
            vec![],
        );
    }

    let (clusters, unresolved) = negative_structure(a, &d.eigenvalues, tol);
    if clusters.is_empty() && unresolved.is_empty() {
        return verdict(RealLogKind::Yes, "no negative real eigenvalues".into(), vec![]);
    }

    let mut blocks = Vec::new();
    let mut odd = Vec::new();
    let mut notes = String::new();
    for c in &clusters {
        if c.fragile {
            let _ = write!(notes, "; rank decision at {} is ill-conditioned", c.lambda);
        }
        for &(size, count) in &c.sizes {
            if count % 2 != 0 {
                odd.push(format!("{count} block(s) of size {size} at {}", c.lambda));
            }
            blocks.push(JordanBlockCount {
                eigenvalue: c.lambda,
                size,
                count,
            });
        }
    }
    if !unresolved.is_empty() {
        let list: Vec<String> = unresolved.iter().map(|x| x.to_string()).collect();
        odd.push(format!(
            "Jordan structure at {} could not be resolved and is treated as unpaired",
            list.join(", ")
        ));
    }

    let summary = blocks
        .iter()
        .map(|b| format!("{}x[{}]@{}", b.count, b.size, b.eigenvalue))
        .collect::<Vec<_>>()
        .join(", ");
    if odd.is_empty() {
        verdict(
            RealLogKind::Yes,
            format!("negative Jordan blocks all paired: {summary}{notes}"),
            blocks,
        )
    } else {
        verdict(
            RealLogKind::No,
            format!("unpaired negative Jordan blocks: {}{notes}", odd.join(", ")),
            blocks,
        )
    }
}

/// Negative real eigenvalues grouped by single linkage at `tol`, as
/// `(mean, algebraic multiplicity)` sorted by value.
pub(crate) fn negative_real_clusters(eigs: &CVec, tol: f64) -> Vec<(f64, usize)> {
    let mut neg: Vec<f64> = eigs
        .iter()
        .filter(|z| z.im.abs() <= tol && z.re < -tol)
        .map(|z| z.re)
        .collect();
    neg.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut group: Vec<f64> = Vec::new();
    for x in neg {
        if let Some(&last) = group.last() {
            if x - last > tol {
                out.push((group.iter().sum::<f64>() / group.len() as f64, group.len()));
                group.clear();
            }
        }
        group.push(x);
    }
    if !group.is_empty() {
        out.push((group.iter().sum::<f64>() / group.len() as f64, group.len()));
    }
    out
}

struct NegativeCluster {
    lambda: f64,
    sizes: Vec<(usize, usize)>,
    fragile: bool,
}

/// Jordan structure at every negative real eigenvalue.
///
/// Eigenvalues with negative real part are grouped by single linkage,
/// starting at `tol` and widening tenfold while some group is inconsistent.
/// A group is accepted when its mean is real and the generalized kernel of
/// `A - mean I` has exactly the group's size; defective blocks split into
/// complex clouds that only merge at the wider tolerances. Returns the
/// accepted clusters and any real eigenvalues left over.
fn negative_structure(a: &DMatrix<f64>, eigs: &CVec, tol: f64) -> (Vec<NegativeCluster>, Vec<f64>) {
    let n = a.nrows();
    let mut pool: Vec<Complex64> = eigs.iter().copied().filter(|z| z.re < -tol).collect();
    let mut clusters = Vec::new();
    let mut tau = tol;
    let tau_max = (WIDEST_LINKAGE * a.norm()).max(tol);
    while !pool.is_empty() && tau <= tau_max {
        let mut accepted = vec![false; pool.len()];
        for group in single_linkage(&pool, tau) {
            let mean = group.iter().map(|&i| pool[i]).sum::<Complex64>() / group.len() as f64;
            if mean.im.abs() > tol {
                continue;
            }
            let shifted = a - DMatrix::identity(n, n) * mean.re;
            let (dims, fragile) = kernel_chain(&shifted, tol);
            if dims.last().copied() == Some(group.len()) {
                let at_least: Vec<usize> = dims.windows(2).map(|w| w[1] - w[0]).collect();
                let sizes = (0..at_least.len())
                    .filter_map(|j| {
                        let count = at_least[j] - at_least.get(j + 1).copied().unwrap_or(0);
                        (count > 0).then_some((j + 1, count))
                    })
                    .collect();
                clusters.push(NegativeCluster {
                    lambda: mean.re,
                    sizes,
                    fragile,
                });
                for i in group {
                    accepted[i] = true;
                }
            }
        }
        pool = pool.into_iter().zip(accepted).filter(|(_, a)| !a).map(|(z, _)| z).collect();
        tau *= 10.0;
    }
    clusters.sort_by(|x, y| x.lambda.total_cmp(&y.lambda));
    let unresolved = pool.iter().filter(|z| z.im.abs() <= tol).map(|z| z.re).collect();
    (clusters, unresolved)
}

/// Connected components of the points under the relation `|x - y| <= tau`.
fn single_linkage(points: &[Complex64], tau: f64) -> Vec<Vec<usize>> {
    let k = points.len();
    let mut label: Vec<usize> = (0..k).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..k {
        for j in i + 1..k {
            if (points[i] - points[j]).norm() <= tau {
                let (ri, rj) = (root(&mut label, i), root(&mut label, j));
                label[ri] = rj;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..k {
        let r = root(&mut label, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// `dim ker S^j` for `j = 0, 1, ...` until the sequence stabilizes, and
/// whether any singular value fell within `FRAGILE_FACTOR` of `thr`.
///
/// `x` is in `ker S^j` iff `S x` is in `ker S^{j-1}`, so each kernel is the
/// null space of `S` followed by the projector onto the complement of the
/// previous kernel. No matrix powers are formed.
fn kernel_chain(s: &DMatrix<f64>, thr: f64) -> (Vec<usize>, bool) {
    let n = s.nrows();
    let mut dims = vec![0usize];
    let mut basis = DMatrix::<f64>::zeros(n, 0);
    let mut fragile = false;
    while dims.len() <= n + 1 {
        let proj = DMatrix::identity(n, n) - &basis * basis.transpose();
        let svd = (&proj * s).svd(false, true);
        let Some(v_t) = svd.v_t else { break };
        let sv = &svd.singular_values;
        fragile |= sv.iter().any(|&x| x > thr / FRAGILE_FACTOR && x < thr * FRAGILE_FACTOR);
        let null: Vec<_> = (0..sv.len()).filter(|&i| sv[i] <= thr).map(|i| v_t.row(i).transpose()).collect();
        let d = null.len();
        if d == *dims.last().unwrap() {
            break;
        }
        dims.push(d);
        basis = DMatrix::from_columns(&null);
    }
    (dims, fragile)
}
