//! The discrete piecewise-linear map `z' = A z + W max(z, 0) + h (+ C s)`
//! and its decomposition into orthant-wise affine systems.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest state dimension that fits a region ordinal in a `u64`.
pub const MAX_DIM: usize = 64;
/// Default cap on `M` for full `2^M` region enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct PlrnnModel {
    a_diag: DVector<f64>,
    w: DMatrix<f64>,
    h: DVector<f64>,
    dt: f64,
    c: Option<DMatrix<f64>>,
}

impl PlrnnModel {
    /// Validates dimensions and finiteness. An input matrix with zero
    /// columns is stored as absent.
    pub fn new(
        a_diag: DVector<f64>,
        w: DMatrix<f64>,
        h: DVector<f64>,
        dt: f64,
        c: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let m = a_diag.len();
        if m == 0 {
            return Err(Error::InvalidModel("dim must be at least 1".into()));
        }
        if m > MAX_DIM {
            return Err(Error::InvalidModel(format!("dim {m} exceeds the supported maximum {MAX_DIM}")));
        }
        if w.nrows() != m || w.ncols() != m {
            return Err(Error::Dimension(format!("w is {}x{}, expected {m}x{m}", w.nrows(), w.ncols())));
        }
        if h.len() != m {
            return Err(Error::Dimension(format!("h has length {}, expected {m}", h.len())));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidModel(format!("dt must be positive and finite, got {dt}")));
        }
        let c = c.filter(|c| c.ncols() > 0);
        if let Some(c) = &c {
            if c.nrows() != m {
                return Err(Error::Dimension(format!("c has {} rows, expected {m}", c.nrows())));
            }
        }
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        if !finite(a_diag.as_slice())
            || !finite(w.as_slice())
            || !finite(h.as_slice())
            || !c.as_ref().is_none_or(|c| finite(c.as_slice()))
        {
            return Err(Error::InvalidModel("all entries must be finite".into()));
        }
        Ok(PlrnnModel { a_diag, w, h, dt, c })
    }

    pub fn dim(&self) -> usize {
        self.a_diag.len()
    }

    pub fn input_dim(&self) -> usize {
        self.c.as_ref().map_or(0, |c| c.ncols())
    }

    pub fn a_diag(&self) -> &DVector<f64> {
        &self.a_diag
    }

    pub fn a(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.a_diag)
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn c(&self) -> Option<&DMatrix<f64>> {
        self.c.as_ref()
    }

    pub fn with_h(&self, h: DVector<f64>) -> Result<Self> {
        Self::new(self.a_diag.clone(), self.w.clone(), h, self.dt, self.c.clone())
    }

    /// `C s`, the input contribution to the bias; zero when the model has no inputs.
    pub fn input_drive(&self, input: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        match (&self.c, input) {
            (None, None) => Ok(DVector::zeros(self.dim())),
            (Some(c), Some(s)) => {
                if s.len() != c.ncols() {
                    return Err(Error::Dimension(format!(
                        "input has length {}, expected {}",
                        s.len(),
                        c.ncols()
                    )));
                }
                if !s.iter().all(|x| x.is_finite()) {
                    return Err(Error::InvalidState("non-finite input".into()));
                }
                Ok(c * s)
            }
            (None, Some(_)) => Err(Error::Dimension("input given to a model without inputs".into())),
            (Some(c), None) => Err(Error::Dimension(format!("model expects an input of length {}", c.ncols()))),
        }
    }
}

/// A sign pattern `d` of the state, stored as the integer whose bit `i`
/// is `d_{i+1}` (the mirrored binary digit string).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionIndex {
    ordinal: u64,
    dim: usize,
}

impl RegionIndex {
    pub fn from_ordinal(ordinal: u64, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension(format!("region dimension {dim} outside 1..={MAX_DIM}")));
        }
        if dim < 64 && ordinal >> dim != 0 {
            return Err(Error::Dimension(format!("ordinal {ordinal} out of range for dimension {dim}")));
        }
        Ok(RegionIndex { ordinal, dim })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let ordinal = bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i));
        Self::from_ordinal(ordinal, bits.len())
    }

    pub fn ordinal(&self) -> u64 {
        self.ordinal
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Gate of coordinate `i` (0-based).
    pub fn bit(&self, i: usize) -> bool {
        i < self.dim && (self.ordinal >> i) & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.dim).map(|i| self.bit(i)).collect()
    }

    pub fn flip(&self, i: usize) -> Self {
        RegionIndex {
            ordinal: self.ordinal ^ (1u64 << i),
            dim: self.dim,
        }
    }
}

impl fmt::Display for RegionIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for i in 0..self.dim {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", u8::from(self.bit(i)))?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSystem {
    pub region: RegionIndex,
    pub w_omega: DMatrix<f64>,
    pub h: DVector<f64>,
}

impl RegionSystem {
    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.w_omega * z + &self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    NonPositive,
    Free,
}

/// The facet `z_s = 0` shared by two regions. `fixed_signs[coordinate]`
/// is `Free`; every other entry is the common sign of the two regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Boundary {
    pub coordinate: usize,
    pub fixed_signs: Vec<Sign>,
}

impl Boundary {
    pub fn contains(&self, z: &DVector<f64>, tol: f64) -> bool {
        z.len() == self.fixed_signs.len()
            && z[self.coordinate].abs() <= tol
            && self.fixed_signs.iter().zip(z.iter()).all(|(s, &x)| match s {
                Sign::Positive => x > 0.0,
                Sign::NonPositive => x <= 0.0,
                Sign::Free => true,
            })
    }
}

pub fn classify_state(z: &DVector<f64>) -> Result<RegionIndex> {
    if let Some(i) = z.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidState(format!("coordinate {} is not finite", i + 1)));
    }
    let bits: Vec<bool> = z.iter().map(|&x| x > 0.0).collect();
    RegionIndex::from_bits(&bits)
}

pub fn region_system(model: &PlrnnModel, region: RegionIndex) -> Result<RegionSystem> {
    let m = model.dim();
    if region.dim() != m {
        return Err(Error::Dimension(format!("region has dimension {}, model {m}", region.dim())));
    }
    let mut w_omega = DMatrix::zeros(m, m);
    for j in 0..m {
        if region.bit(j) {
            w_omega.set_column(j, &model.w.column(j));
        }
    }
    for i in 0..m {
        w_omega[(i, i)] += model.a_diag[i];
    }
    Ok(RegionSystem {
        region,
        w_omega,
        h: model.h.clone(),
    })
}

pub fn enumerate_regions(model: &PlrnnModel) -> Result<Vec<RegionSystem>> {
    enumerate_regions_with_cap(model, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_regions_with_cap(model: &PlrnnModel, cap: usize) -> Result<Vec<RegionSystem>> {
    let m = model.dim();
    if m > cap {
        return Err(Error::EnumerationCap { dim: m, cap });
    }
    (0..(1u64 << m))
        .map(|k| region_system(model, RegionIndex::from_ordinal(k, m)?))
        .collect()
}

/// The shared facet of two regions that differ in exactly one gate.
pub fn boundaries(a: RegionIndex, b: RegionIndex) -> Result<Option<Boundary>> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("regions of dimension {} and {}", a.dim(), b.dim())));
    }
    let diff = a.ordinal() ^ b.ordinal();
    if diff.count_ones() != 1 {
        return Ok(None);
    }
    let s = diff.trailing_zeros() as usize;
    let fixed_signs = (0..a.dim())
        .map(|i| match (i == s, a.bit(i)) {
            (true, _) => Sign::Free,
            (false, true) => Sign::Positive,
            (false, false) => Sign::NonPositive,
        })
        .collect();
    Ok(Some(Boundary {
        coordinate: s,
        fixed_signs,
    }))
}

/// One application of the map. `input` must be present exactly when the
/// model has inputs.
pub fn step_discrete(model: &PlrnnModel, z: &DVector<f64>, input: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    step_at(model, z, input, 0)
}

pub(crate) fn step_at(
    model: &PlrnnModel,
    z: &DVector<f64>,
    input: Option<&DVector<f64>>,
    step: usize,
) -> Result<DVector<f64>> {
    if z.len() != model.dim() {
        return Err(Error::Dimension(format!("state has length {}, expected {}", z.len(), model.dim())));
    }
    if !z.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite state at step {step}")));
    }
    let relu = z.map(|x| x.max(0.0));
    let next = model.a_diag.component_mul(z) + &model.w * relu + &model.h + model.input_drive(input)?;
    if next.iter().all(|x| x.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Overflow {
            step,
            detail: "discrete map produced a non-finite state".into(),
        })
    }
}
