//! Region-wise conversion of the discrete map into a piecewise-linear ODE
//! `zeta' = W~ zeta + h~` whose time-`dt` flow reproduces `W_Omega z + h`.
//!
//! `W~ = log(W_Omega) / dt` in every case; the bias formula depends on the
//! unit eigenvalues of `W_Omega`:
//!
//! * none: `h~ = -(1/dt) log(W) (I - W)^{-1} h`
//! * some, diagonalizable: in the eigenbasis `V` with the `n` unit
//!   eigenvalues first, `h~ = -(1/dt) V (P_n + log E) (Q_n - E)^{-1} V^{-1} h`
//!   with `P_n = diag(1..1, 0..0)` and `Q_n = I - P_n`
//! * otherwise: `h~ = (W int_0^dt e^{-tau W~} d tau)^{-1} h`

use std::borrow::Cow;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    decompose, decompose_complex, integral_exp, integral_exp_checked, is_integral_singular_eigenvalue, mat_exp, max_abs,
    mat_log_principal, real_log, real_log_exists, rel_diff, split_real_vec, to_complex, to_complex_vec,
    CMat, CVec, RealLogKind, RealLogOutcome, RealLogVerdict, SpectralDecomposition, PROJECTION_TOL, ROUNDTRIP_TOL,
};
use crate::model::{enumerate_regions_with_cap, region_system, PlrnnModel, RegionIndex, RegionSystem, DEFAULT_ENUMERATION_CAP};

/// Eigenvalues within `UNIT_TOL * ||W_Omega||_F` of 1 count as unit eigenvalues.
pub const UNIT_TOL: f64 = 1e-9;
/// Eigenvector condition number above which the eigenbasis formula gives way
/// to the integral formula.
pub const T2_COND_LIMIT: f64 = 1e8;
/// Agreement required between the two bias formulas when both apply.
pub const FORMULA_AGREEMENT_TOL: f64 = 1e-10;
/// Imaginary state components up to this (relative to `max(1, |state|)`) are dropped.
pub const STATE_IMAG_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-12;
/// `||int_0^dt e^{W~ s} ds h~ - h|| / ||h||` above this triggers the integral-formula fallback.
const BIAS_IDENTITY_TOL: f64 = 1e-9;
/// Only compare the two bias formulas when the eigenbasis is this well conditioned.
const FORMULA_AGREEMENT_COND: f64 = 1e4;
/// Generators with condition number above this use the augmented flow form.
const GENERATOR_COND_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    T1,
    T2,
    T3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Realness {
    Real,
    /// Imaginary parts of at most `max_imag` were discarded.
    Projected { max_imag: f64 },
    Complex { max_imag: f64 },
}

impl Realness {
    pub fn is_real(&self) -> bool {
        !matches!(self, Realness::Complex { .. })
    }
}

/// `zeta(t) = e z0 + g h~` for one fixed `t`.
#[derive(Debug, Clone)]
pub struct FlowOperator {
    pub e: CMat,
    pub g: CMat,
}

impl FlowOperator {
    pub fn apply(&self, z0: &DVector<f64>, h_tilde: &CVec) -> Result<DVector<f64>> {
        let z = &self.e * to_complex_vec(z0) + &self.g * h_tilde;
        realify_state(&z)
    }
}

/// Drops the imaginary part of a state after checking that it is roundoff.
pub(crate) fn realify_state(z: &CVec) -> Result<DVector<f64>> {
    let (re, max_imag) = split_real_vec(z);
    if !re.iter().all(|x| x.is_finite()) {
        return Err(Error::Overflow {
            step: 0,
            detail: "continuous flow produced a non-finite state".into(),
        });
    }
    let scale = re.amax().max(1.0);
    if max_imag > STATE_IMAG_TOL * scale {
        return Err(Error::ImaginaryResidue { max_imag });
    }
    Ok(re)
}

#[derive(Debug, Clone)]
pub struct ContinuousRegionSystem {
    pub region: RegionIndex,
    pub w_tilde: CMat,
    pub h_tilde: CVec,
    pub dt: f64,
    pub theorem: Theorem,
    pub unit_eig_count: usize,
    pub realness: Realness,
    generator_inverse: Option<CMat>,
    h_map: CMat,
}

impl ContinuousRegionSystem {
    pub fn from_parts(
        region: RegionIndex,
        w_tilde: CMat,
        h_tilde: CVec,
        dt: f64,
        theorem: Theorem,
        unit_eig_count: usize,
        realness: Realness,
    ) -> Result<Self> {
        let m = region.dim();
        if w_tilde.nrows() != m || w_tilde.ncols() != m || h_tilde.len() != m {
            return Err(Error::Dimension(format!(
                "continuous system for {region} has W~ {}x{} and h~ of length {}",
                w_tilde.nrows(),
                w_tilde.ncols(),
                h_tilde.len()
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidModel(format!("dt must be positive and finite, got {dt}")));
        }
        let b = integral_exp(&w_tilde, dt)?;
        let h_map = match b.try_inverse() {
            Some(inv) => inv,
            None => {
                let d = decompose_complex(&w_tilde)?;
                let eigenvalue = d
                    .eigenvalues
                    .iter()
                    .copied()
                    .find(|&l| is_integral_singular_eigenvalue(l, dt))
                    .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
                return Err(Error::IntegralSingular { eigenvalue });
            }
        };
        let generator_inverse = if crate::linalg::condition_2(&w_tilde) <= GENERATOR_COND_LIMIT {
            w_tilde.clone().try_inverse()
        } else {
            None
        };
        Ok(ContinuousRegionSystem {
            region,
            w_tilde,
            h_tilde,
            dt,
            theorem,
            unit_eig_count,
            realness,
            generator_inverse,
            h_map,
        })
    }

    /// A real system given directly by its generator and bias. The theorem
    /// label is the one conversion would pick for `e^{dt W~}`.
    pub fn from_generator(region: RegionIndex, w_tilde: &DMatrix<f64>, h_tilde: &DVector<f64>, dt: f64) -> Result<Self> {
        let wt = to_complex(w_tilde);
        let d = decompose_complex(&(&wt * Complex64::new(dt, 0.0)))?;
        let tol = UNIT_TOL * (w_tilde.norm() * dt).max(1.0);
        let one = Complex64::new(1.0, 0.0);
        let n = d.eigenvalues.iter().filter(|l| (l.exp() - one).norm() <= tol).count();
        let theorem = match (n, d.is_diagonalizable) {
            (0, _) => Theorem::T1,
            (_, true) => Theorem::T2,
            (_, false) => Theorem::T3,
        };
        Self::from_parts(region, wt, to_complex_vec(h_tilde), dt, theorem, n, Realness::Real)
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn w_tilde_real(&self) -> Option<DMatrix<f64>> {
        self.realness.is_real().then(|| self.w_tilde.map(|z| z.re))
    }

    pub fn h_tilde_real(&self) -> Option<DVector<f64>> {
        self.realness.is_real().then(|| self.h_tilde.map(|z| z.re))
    }

    /// `(int_0^dt e^{W~ s} ds)^{-1}`: the linear map taking a discrete bias
    /// to its continuous counterpart.
    pub fn h_map(&self) -> &CMat {
        &self.h_map
    }

    pub fn generator_invertible(&self) -> bool {
        self.generator_inverse.is_some()
    }

    /// Continuous bias for the discrete bias `h + drive` (zero-order hold).
    pub fn h_tilde_with_drive(&self, drive: &DVector<f64>) -> CVec {
        if drive.iter().all(|&x| x == 0.0) {
            self.h_tilde.clone()
        } else {
            &self.h_tilde + &self.h_map * to_complex_vec(drive)
        }
    }

    /// `W~ z + h~`, real part.
    pub fn velocity(&self, z: &DVector<f64>, h_tilde: &CVec) -> DVector<f64> {
        (&self.w_tilde * to_complex_vec(z) + h_tilde).map(|c| c.re)
    }

    pub fn flow_operator(&self, t: f64) -> Result<FlowOperator> {
        let m = self.dim();
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidState(format!("flow time must be nonnegative, got {t}")));
        }
        if t == 0.0 {
            return Ok(FlowOperator {
                e: CMat::identity(m, m),
                g: CMat::zeros(m, m),
            });
        }
        let ct = Complex64::new(t, 0.0);
        let e = mat_exp(&(&self.w_tilde * ct))?;
        let g = match &self.generator_inverse {
            Some(inv) => (CMat::identity(m, m) - &e) * (-inv),
            None => &e * integral_exp(&(-&self.w_tilde), t)?,
        };
        Ok(FlowOperator { e, g })
    }

    /// `zeta(t)` from `z0` under the region's own bias.
    pub fn flow(&self, z0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        self.flow_with(z0, t, &self.h_tilde)
    }

    pub fn flow_with(&self, z0: &DVector<f64>, t: f64, h_tilde: &CVec) -> Result<DVector<f64>> {
        if z0.len() != self.dim() {
            return Err(Error::Dimension(format!("state has length {}, expected {}", z0.len(), self.dim())));
        }
        if t == 0.0 {
            return Ok(z0.clone());
        }
        self.flow_operator(t)?.apply(z0, h_tilde)
    }
}

/// Per-region diagnostics, filled as far as conversion got.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub ordinal: u64,
    pub bits: String,
    pub converted: bool,
    pub error: Option<String>,
    pub invertible: bool,
    pub min_abs_eigenvalue: f64,
    pub unit_eig_count: usize,
    pub distance_to_one: f64,
    pub diagonalizable: bool,
    pub eigenvector_condition: f64,
    pub real_log_verdict: Option<RealLogVerdict>,
    pub theorem: Option<Theorem>,
    pub realness: Option<Realness>,
    pub roundtrip_residual: Option<f64>,
    pub equivalence_residual: Option<f64>,
    pub formula_gap: Option<f64>,
    pub notes: Vec<String>,
}

impl RegionReport {
    fn new(region: RegionIndex) -> Self {
        RegionReport {
            ordinal: region.ordinal(),
            bits: region.to_string(),
            converted: false,
            error: None,
            invertible: false,
            min_abs_eigenvalue: f64::NAN,
            unit_eig_count: 0,
            distance_to_one: f64::NAN,
            diagonalizable: false,
            eigenvector_condition: f64::NAN,
            real_log_verdict: None,
            theorem: None,
            realness: None,
            roundtrip_residual: None,
            equivalence_residual: None,
            formula_gap: None,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionReport {
    pub regions: Vec<RegionReport>,
    pub converted: usize,
    pub failed: Vec<u64>,
    /// Regions are converted on demand instead of up front.
    pub lazy: bool,
}

pub fn convert_region(rs: &RegionSystem, dt: f64) -> Result<ContinuousRegionSystem> {
    convert_region_with_report(rs, dt).0
}

pub fn convert_region_with_report(rs: &RegionSystem, dt: f64) -> (Result<ContinuousRegionSystem>, RegionReport) {
    let mut report = RegionReport::new(rs.region);
    let result = convert_inner(rs, dt, &mut report);
    match &result {
        Ok(_) => report.converted = true,
        Err(e) => report.error = Some(e.to_string()),
    }
    (result, report)
}

fn convert_inner(rs: &RegionSystem, dt: f64, report: &mut RegionReport) -> Result<ContinuousRegionSystem> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidModel(format!("dt must be positive and finite, got {dt}")));
    }
    let w = &rs.w_omega;
    let m = w.nrows();
    if rs.h.len() != m || rs.region.dim() != m {
        return Err(Error::Dimension("region system dimensions disagree".into()));
    }
    let norm = w.norm();
    let d = decompose(w)?;
    let min_abs = d.min_abs_eigenvalue();
    report.min_abs_eigenvalue = min_abs;
    report.diagonalizable = d.is_diagonalizable;
    report.eigenvector_condition = d.condition_estimate;
    let one = Complex64::new(1.0, 0.0);
    let unit_tol = UNIT_TOL * norm;
    report.distance_to_one = d.eigenvalues.iter().map(|l| (l - one).norm()).fold(f64::INFINITY, f64::min);
    let n = d.eigenvalues.iter().filter(|l| (*l - one).norm() <= unit_tol).count();
    report.unit_eig_count = n;
    report.invertible = norm > 0.0 && min_abs > SINGULAR_TOL * norm;
    let verdict = real_log_exists(w);
    let verdict_kind = verdict.kind;
    report.real_log_verdict = Some(verdict);
    if !report.invertible {
        return Err(Error::NotConvertible {
            ordinal: rs.region.ordinal(),
            detail: format!("smallest eigenvalue magnitude {min_abs:e}"),
        });
    }

    let principal = mat_log_principal(w)?;
    let (log_w, mut realness) = if principal.was_projected_real {
        let r = if principal.max_imag == 0.0 {
            Realness::Real
        } else {
            Realness::Projected {
                max_imag: principal.max_imag,
            }
        };
        (principal.value.clone(), r)
    } else if verdict_kind == RealLogKind::Yes {
        match real_log(w)? {
            RealLogOutcome::Real { value, .. } => {
                report.notes.push("non-principal real logarithm (negative eigenvalues paired)".into());
                (to_complex(&value), Realness::Real)
            }
            RealLogOutcome::Declined { reason, .. } => {
                report.notes.push(format!("real logarithm declined: {reason}"));
                (
                    principal.value.clone(),
                    Realness::Complex {
                        max_imag: principal.max_imag,
                    },
                )
            }
        }
    } else {
        (
            principal.value.clone(),
            Realness::Complex {
                max_imag: principal.max_imag,
            },
        )
    };
    let cdt = Complex64::new(dt, 0.0);
    let w_tilde = &log_w / cdt;

    let mut theorem = if n == 0 {
        Theorem::T1
    } else if d.is_diagonalizable && d.condition_estimate <= T2_COND_LIMIT {
        Theorem::T2
    } else {
        if d.is_diagonalizable {
            report.notes.push(format!(
                "eigenvector condition {:e} above {T2_COND_LIMIT:e}; integral formula used",
                d.condition_estimate
            ));
        }
        Theorem::T3
    };
    let mut h_tilde = match theorem {
        Theorem::T1 => h_tilde_theorem1(w, &log_w, &rs.h, dt)?,
        Theorem::T2 => h_tilde_theorem2(&d, &w_tilde, &rs.h, dt, unit_tol)?,
        Theorem::T3 => h_tilde_theorem3(w, &w_tilde, &rs.h, dt)?,
    };

    if n == 0 && d.is_diagonalizable && d.condition_estimate <= FORMULA_AGREEMENT_COND {
        let alt = h_tilde_theorem2(&d, &w_tilde, &rs.h, dt, unit_tol)?;
        let scale = max_abs(&h_tilde).max(1.0);
        let gap = max_abs(&(&alt - &h_tilde)) / scale;
        report.formula_gap = Some(gap);
        if gap > FORMULA_AGREEMENT_TOL {
            return Err(Error::Accuracy {
                what: "agreement of the two bias formulas without unit eigenvalues".into(),
                residual: gap,
                tolerance: FORMULA_AGREEMENT_TOL,
            });
        }
    }

    let bias_check = |ht: &CVec| -> Result<f64> {
        let b = integral_exp(&w_tilde, dt)?;
        let hn = rs.h.amax();
        let r = max_abs(&(b * ht - to_complex_vec(&rs.h)));
        Ok(if hn > 0.0 { r / hn } else { r })
    };
    let mut bias_residual = bias_check(&h_tilde)?;
    if bias_residual > BIAS_IDENTITY_TOL && theorem != Theorem::T3 {
        report.notes.push(format!(
            "{theorem:?} bias missed the integral identity ({bias_residual:e}); integral formula used"
        ));
        theorem = Theorem::T3;
        h_tilde = h_tilde_theorem3(w, &w_tilde, &rs.h, dt)?;
        bias_residual = bias_check(&h_tilde)?;
    }
    if bias_residual > BIAS_IDENTITY_TOL {
        return Err(Error::Accuracy {
            what: "bias integral identity".into(),
            residual: bias_residual,
            tolerance: BIAS_IDENTITY_TOL,
        });
    }

    if realness.is_real() {
        let (re, h_imag) = split_real_vec(&h_tilde);
        if h_imag > PROJECTION_TOL * re.amax().max(1.0) {
            realness = Realness::Complex { max_imag: h_imag };
        } else {
            if h_imag > 0.0 {
                let prev = match realness {
                    Realness::Projected { max_imag } => max_imag,
                    _ => 0.0,
                };
                realness = Realness::Projected {
                    max_imag: prev.max(h_imag),
                };
            }
            h_tilde = to_complex_vec(&re);
        }
    }

    let roundtrip = rel_diff(&mat_exp(&(&w_tilde * cdt))?, &to_complex(w));
    report.roundtrip_residual = Some(roundtrip);
    if roundtrip > ROUNDTRIP_TOL {
        return Err(Error::Accuracy {
            what: "exp(dt W~) against W_omega".into(),
            residual: roundtrip,
            tolerance: ROUNDTRIP_TOL,
        });
    }

    let crs = ContinuousRegionSystem::from_parts(rs.region, w_tilde, h_tilde, dt, theorem, n, realness)?;
    report.theorem = Some(theorem);
    report.realness = Some(realness);
    report.equivalence_residual = Some(verify_step(rs, &crs, &DVector::from_element(m, 1.0), dt));
    Ok(crs)
}

/// Bias without unit eigenvalues: `-(1/dt) log(W) (I - W)^{-1} h`.
pub fn h_tilde_theorem1(w: &DMatrix<f64>, log_w: &CMat, h: &DVector<f64>, dt: f64) -> Result<CVec> {
    let m = w.nrows();
    let i_minus_w = DMatrix::identity(m, m) - w;
    let x = i_minus_w.lu().solve(h).ok_or_else(|| Error::NotConvertible {
        ordinal: 0,
        detail: "I - W_omega is singular".into(),
    })?;
    Ok(-(log_w * to_complex_vec(&x)) / Complex64::new(dt, 0.0))
}

/// Bias from the eigenbasis block formula; unit eigenvalues are those
/// within `unit_tol` of 1.
pub fn h_tilde_theorem2(
    d: &SpectralDecomposition,
    w_tilde: &CMat,
    h: &DVector<f64>,
    dt: f64,
    unit_tol: f64,
) -> Result<CVec> {
    let m = d.dim();
    let one = Complex64::new(1.0, 0.0);
    let (unit, rest): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| (d.eigenvalues[i] - one).norm() <= unit_tol);
    let n = unit.len();
    let order: Vec<usize> = unit.into_iter().chain(rest).collect();
    let v = CMat::from_fn(m, m, |r, c| d.eigenvectors[(r, order[c])]);
    let vinv = v.clone().try_inverse().ok_or_else(|| Error::Accuracy {
        what: "eigenvector matrix inversion".into(),
        residual: f64::INFINITY,
        tolerance: 0.0,
    })?;
    let log_e = &vinv * w_tilde * &v * Complex64::new(dt, 0.0);
    let mut left = log_e;
    for i in 0..n {
        left[(i, i)] += one;
    }
    // (Q_n - E)^{-1} is diagonal.
    let y = &vinv * to_complex_vec(h);
    let scaled = CVec::from_fn(m, |i, _| {
        let lambda = d.eigenvalues[order[i]];
        let q = if i < n { 0.0 } else { 1.0 };
        y[i] / (Complex64::new(q, 0.0) - lambda)
    });
    Ok(-(v * (left * scaled)) / Complex64::new(dt, 0.0))
}

/// Bias from the integral formula: `(W int_0^dt e^{-tau W~} d tau)^{-1} h`.
pub fn h_tilde_theorem3(w: &DMatrix<f64>, w_tilde: &CMat, h: &DVector<f64>, dt: f64) -> Result<CVec> {
    let b = integral_exp_checked(&(-w_tilde), dt)?;
    let wb = to_complex(w) * b;
    wb.lu().solve(&to_complex_vec(h)).ok_or_else(|| Error::Accuracy {
        what: "W_omega times the exponential integral is singular".into(),
        residual: f64::INFINITY,
        tolerance: 0.0,
    })
}

/// `||zeta(dt) - (W_omega z0 + h)||_inf`; infinite when the flow cannot be evaluated.
pub fn verify_step(rs: &RegionSystem, crs: &ContinuousRegionSystem, z0: &DVector<f64>, dt: f64) -> f64 {
    match crs.flow(z0, dt) {
        Ok(z) => {
            let r = (z - rs.apply(z0)).amax();
            if r.is_nan() {
                f64::INFINITY
            } else {
                r
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// All converted regions of a model, plus the source model when regions
/// are converted on demand.
#[derive(Debug, Clone)]
pub struct ConvertedModel {
    dim: usize,
    dt: f64,
    systems: BTreeMap<u64, ContinuousRegionSystem>,
    failures: BTreeMap<u64, Error>,
    report: ConversionReport,
    source: Option<PlrnnModel>,
}

impl ConvertedModel {
    /// Wraps systems loaded from elsewhere (no source model, no report details).
    pub fn from_systems(dim: usize, dt: f64, systems: Vec<ContinuousRegionSystem>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for s in systems {
            if s.dim() != dim {
                return Err(Error::Dimension(format!("region {} has dimension {}, expected {dim}", s.region, s.dim())));
            }
            if (s.dt - dt).abs() > 1e-15 * dt {
                return Err(Error::InvalidModel(format!("region {} has dt {} instead of {dt}", s.region, s.dt)));
            }
            if map.insert(s.region.ordinal(), s).is_some() {
                return Err(Error::InvalidModel("duplicate region ordinal".into()));
            }
        }
        let converted = map.len();
        Ok(ConvertedModel {
            dim,
            dt,
            systems: map,
            failures: BTreeMap::new(),
            report: ConversionReport {
                regions: Vec::new(),
                converted,
                failed: Vec::new(),
                lazy: false,
            },
            source: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn systems(&self) -> &BTreeMap<u64, ContinuousRegionSystem> {
        &self.systems
    }

    pub fn failures(&self) -> &BTreeMap<u64, Error> {
        &self.failures
    }

    pub fn report(&self) -> &ConversionReport {
        &self.report
    }

    pub fn is_lazy(&self) -> bool {
        self.report.lazy
    }

    /// The system of `region`, converting it now if this model is lazy.
    pub fn system_for(&self, region: RegionIndex) -> Result<Cow<'_, ContinuousRegionSystem>> {
        if let Some(s) = self.systems.get(&region.ordinal()) {
            return Ok(Cow::Borrowed(s));
        }
        if let Some(e) = self.failures.get(&region.ordinal()) {
            return Err(e.clone());
        }
        match &self.source {
            Some(model) => {
                let rs = region_system(model, region)?;
                convert_region(&rs, model.dt()).map(Cow::Owned)
            }
            None => Err(Error::MissingRegion {
                ordinal: region.ordinal(),
                detail: "not present in the converted model".into(),
            }),
        }
    }
}

pub fn convert_model(model: &PlrnnModel) -> Result<ConvertedModel> {
    convert_model_with_cap(model, DEFAULT_ENUMERATION_CAP)
}

/// Converts every region when `M <= cap`; above the cap regions are
/// converted on demand through [`ConvertedModel::system_for`].
pub fn convert_model_with_cap(model: &PlrnnModel, cap: usize) -> Result<ConvertedModel> {
    let dim = model.dim();
    let dt = model.dt();
    if dim > cap {
        log::info!("dimension {dim} above enumeration cap {cap}: converting regions on demand");
        return Ok(ConvertedModel {
            dim,
            dt,
            systems: BTreeMap::new(),
            failures: BTreeMap::new(),
            report: ConversionReport {
                regions: Vec::new(),
                converted: 0,
                failed: Vec::new(),
                lazy: true,
            },
            source: Some(model.clone()),
        });
    }
    let mut systems = BTreeMap::new();
    let mut failures = BTreeMap::new();
    let mut regions = Vec::new();
    for rs in enumerate_regions_with_cap(model, cap)? {
        let (res, rep) = convert_region_with_report(&rs, dt);
        let k = rs.region.ordinal();
        match res {
            Ok(s) => {
                log::debug!("region {} converted via {:?}", rs.region, s.theorem);
                systems.insert(k, s);
            }
            Err(e) => {
                log::warn!("region {} failed: {e}", rs.region);
                failures.insert(k, e);
            }
        }
        regions.push(rep);
    }
    if systems.is_empty() {
        return Err(Error::ModelNotConvertible { failed: failures.len() });
    }
    let report = ConversionReport {
        converted: systems.len(),
        failed: failures.keys().copied().collect(),
        regions,
        lazy: false,
    };
    Ok(ConvertedModel {
        dim,
        dt,
        systems,
        failures,
        report,
        source: Some(model.clone()),
    })
}
