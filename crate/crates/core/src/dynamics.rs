//! Simulation of the discrete map and of the converted piecewise-linear
//! flow, flow-field sampling and fixed points.
//!
//! The flow inside a region is always evaluated in closed form; the only
//! numerical search is the bracketing and bisection of boundary crossings in
//! event-driven mode.

use std::borrow::Cow;
use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::convert::{ContinuousRegionSystem, ConvertedModel, FlowOperator};
use crate::error::{Error, Result};
use crate::linalg::{to_complex_vec, CVec};
use crate::model::{classify_state, enumerate_regions, step_at, PlrnnModel, RegionIndex};

/// Dense grid points per step when no spacing is given.
pub const DEFAULT_SUBSTEPS: usize = 64;
/// Relative time tolerance of event bisection.
pub const EVENT_TIME_TOL: f64 = 1e-12;
/// Events allowed per unit time before the run is declared Zeno-like.
pub const ZENO_RATE: f64 = 1e6;
/// Velocities at or below this (relative to `max(1, |point|)`) are flagged as equilibria.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
/// Consecutive events closer than `EVENT_TIME_TOL * dt` tolerated before giving up.
const CHATTER_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `z_s` goes from `<= 0` to `> 0`.
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    /// 0-based coordinate whose sign changed.
    pub coordinate: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub regions: Vec<RegionIndex>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, z: DVector<f64>) -> Result<()> {
        let r = classify_state(&z)?;
        self.times.push(t);
        self.states.push(z);
        self.regions.push(r);
        Ok(())
    }

    pub fn regions_visited(&self) -> BTreeSet<u64> {
        self.regions.iter().map(|r| r.ordinal()).collect()
    }

    /// State at the sample whose time is closest to `t`.
    pub fn state_near(&self, t: f64) -> Option<&DVector<f64>> {
        let i = self.times.partition_point(|&x| x < t);
        let candidates = [i.checked_sub(1), Some(i)];
        candidates
            .into_iter()
            .flatten()
            .filter(|&j| j < self.times.len())
            .min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs()))
            .map(|j| &self.states[j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationMode {
    StepAnchored,
    EventDriven,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub point: DVector<f64>,
    pub velocity: DVector<f64>,
    pub region: RegionIndex,
    pub is_equilibrium: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointKind {
    Isolated,
    /// An affine set of equilibria; `directions` spans it.
    LineAttractorDirection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSet {
    pub region: RegionIndex,
    /// A point of the set (minimum-norm when the set is not a point).
    pub point: DVector<f64>,
    pub directions: Vec<DVector<f64>>,
    pub kind: FixedPointKind,
    /// Whether the set meets its own region. `None` when undecided
    /// (sets of dimension two or more).
    pub admissible: Option<bool>,
    /// `|W~ z* + h~|_inf` for the converted region, when available.
    pub continuous_residual: Option<f64>,
}

fn input_column(model: &PlrnnModel, inputs: Option<&DMatrix<f64>>, k: usize) -> Result<Option<DVector<f64>>> {
    match (model.input_dim(), inputs) {
        (0, None) => Ok(None),
        (0, Some(_)) => Err(Error::Dimension("inputs given to a model without inputs".into())),
        (kdim, None) => Ok(Some(DVector::zeros(kdim))),
        (kdim, Some(s)) => {
            if s.nrows() != kdim {
                return Err(Error::Dimension(format!("inputs have {} rows, expected {kdim}", s.nrows())));
            }
            if k >= s.ncols() {
                return Err(Error::Dimension(format!("inputs cover {} steps, step {k} requested", s.ncols())));
            }
            Ok(Some(s.column(k).into_owned()))
        }
    }
}

fn check_state(model: &PlrnnModel, z0: &DVector<f64>) -> Result<()> {
    if z0.len() != model.dim() {
        return Err(Error::Dimension(format!("z0 has length {}, expected {}", z0.len(), model.dim())));
    }
    if !z0.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidState("z0 must be finite".into()));
    }
    Ok(())
}

/// `steps` iterations of the map; the trajectory has `steps + 1` samples.
/// `inputs` is `K x steps`; a model with inputs and no input matrix gets zeros.
pub fn simulate_discrete(
    model: &PlrnnModel,
    z0: &DVector<f64>,
    steps: usize,
    inputs: Option<&DMatrix<f64>>,
) -> Result<Trajectory> {
    check_state(model, z0)?;
    if steps == 0 {
        return Err(Error::EmptyTrajectory("steps must be at least 1".into()));
    }
    let dt = model.dt();
    let mut traj = Trajectory::default();
    traj.push(0.0, z0.clone())?;
    let mut z = z0.clone();
    for k in 0..steps {
        let s = input_column(model, inputs, k)?;
        z = step_at(model, &z, s.as_ref(), k + 1)?;
        traj.push((k + 1) as f64 * dt, z.clone())?;
    }
    Ok(traj)
}

/// Closed-form state of one region's flow at time `t` from `z0`.
pub fn flow_at(crs: &ContinuousRegionSystem, z0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    if t > crs.dt * (1.0 + 1e-12) {
        return Err(Error::InvalidState(format!("flow time {t} beyond the step length {}", crs.dt)));
    }
    crs.flow(z0, t)
}

/// Flow operators per (region, grid index), reused across steps.
struct OperatorCache<'a> {
    converted: &'a ConvertedModel,
    systems: HashMap<u64, Cow<'a, ContinuousRegionSystem>>,
    ops: HashMap<(u64, usize), FlowOperator>,
    substeps: usize,
    dt: f64,
}

impl<'a> OperatorCache<'a> {
    fn new(converted: &'a ConvertedModel, substeps: usize) -> Self {
        OperatorCache {
            converted,
            systems: HashMap::new(),
            ops: HashMap::new(),
            substeps,
            dt: converted.dt(),
        }
    }

    fn system(&mut self, region: RegionIndex) -> Result<&ContinuousRegionSystem> {
        let k = region.ordinal();
        if !self.systems.contains_key(&k) {
            let s = self.converted.system_for(region)?;
            self.systems.insert(k, s);
        }
        Ok(self.systems[&k].as_ref())
    }

    fn grid_time(&self, j: usize) -> f64 {
        if j == self.substeps {
            self.dt
        } else {
            self.dt * j as f64 / self.substeps as f64
        }
    }

    /// Operator for the grid offset `j * dt / substeps`.
    fn grid_op(&mut self, region: RegionIndex, j: usize) -> Result<&FlowOperator> {
        let key = (region.ordinal(), j);
        if !self.ops.contains_key(&key) {
            let t = self.grid_time(j);
            let op = self.system(region)?.flow_operator(t)?;
            self.ops.insert(key, op);
        }
        Ok(&self.ops[&key])
    }
}

struct StepContext {
    region: RegionIndex,
    h_tilde: CVec,
}

/// Continuous trajectory over `[0, t_end]`.
///
/// In step-anchored mode the region is frozen at the start of every step of
/// length `dt`; in event-driven mode it is re-dispatched at every boundary
/// crossing. Inputs are held constant over each step in both modes.
pub fn simulate_continuous(
    model: &PlrnnModel,
    converted: &ConvertedModel,
    z0: &DVector<f64>,
    t_end: f64,
    mode: SimulationMode,
    dense_dt: Option<f64>,
    inputs: Option<&DMatrix<f64>>,
) -> Result<Trajectory> {
    check_state(model, z0)?;
    let dt = model.dt();
    if converted.dim() != model.dim() || (converted.dt() - dt).abs() > 1e-15 * dt {
        return Err(Error::Dimension("converted model does not match the discrete model".into()));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::EmptyTrajectory(format!("t_end must be positive, got {t_end}")));
    }
    let substeps = match dense_dt {
        None => DEFAULT_SUBSTEPS,
        Some(d) if d.is_finite() && d > 0.0 && d <= dt * (1.0 + 1e-12) => ((dt / d) - 1e-9).ceil().max(1.0) as usize,
        Some(d) => return Err(Error::InvalidState(format!("dense_dt must be in (0, dt], got {d}"))),
    };
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut cache = OperatorCache::new(converted, substeps);
    let mut traj = Trajectory::default();
    traj.push(0.0, z0.clone())?;
    let mut z = z0.clone();
    for k in 0..steps {
        let t0 = k as f64 * dt;
        let last = k + 1 == steps;
        // Fraction of the final step that lies before t_end.
        let step_len = if last { (t_end - t0).min(dt) } else { dt };
        let drive = model.input_drive(input_column(model, inputs, k)?.as_ref())?;
        z = match mode {
            SimulationMode::StepAnchored => anchored_step(&mut cache, &mut traj, &z, t0, step_len, &drive, k)?,
            SimulationMode::EventDriven => event_step(&mut cache, &mut traj, &z, t0, step_len, &drive, k)?,
        };
    }
    Ok(traj)
}

fn step_context(cache: &mut OperatorCache<'_>, z: &DVector<f64>, drive: &DVector<f64>) -> Result<StepContext> {
    let region = classify_state(z)?;
    let sys = cache.system(region)?;
    Ok(StepContext {
        region,
        h_tilde: sys.h_tilde_with_drive(drive),
    })
}

fn with_step(e: Error, step: usize) -> Error {
    match e {
        Error::Overflow { detail, .. } => Error::Overflow { step, detail },
        other => other,
    }
}

fn anchored_step(
    cache: &mut OperatorCache<'_>,
    traj: &mut Trajectory,
    z: &DVector<f64>,
    t0: f64,
    step_len: f64,
    drive: &DVector<f64>,
    k: usize,
) -> Result<DVector<f64>> {
    let ctx = step_context(cache, z, drive)?;
    let mut out = z.clone();
    for j in 1..=cache.substeps {
        let tau = cache.grid_time(j);
        let partial = tau > step_len * (1.0 + 1e-12);
        let zeta = if partial {
            let sys = cache.system(ctx.region)?;
            sys.flow_with(z, step_len, &ctx.h_tilde)
        } else {
            cache.grid_op(ctx.region, j)?.apply(z, &ctx.h_tilde)
        }
        .map_err(|e| with_step(e, k + 1))?;
        let t = if partial { t0 + step_len } else { t0 + tau };
        traj.push(t, zeta.clone())?;
        out = zeta;
        if partial || (step_len - tau).abs() <= 1e-12 * cache.dt {
            break;
        }
    }
    Ok(out)
}

/// Earliest sign-class change of any coordinate in `(lo, hi]` of the flow
/// from `z` (offset `tau0`), returned as `(time offset, state, coordinate)`.
#[allow(clippy::too_many_arguments)]
fn find_crossing(
    sys: &ContinuousRegionSystem,
    z: &DVector<f64>,
    h_tilde: &CVec,
    tau0: f64,
    lo: f64,
    hi: f64,
    z_lo: &DVector<f64>,
    z_hi: &DVector<f64>,
    dt: f64,
) -> Result<Option<(f64, DVector<f64>, usize)>> {
    let at = |tau: f64| sys.flow_with(z, tau - tau0, h_tilde);
    let tol = EVENT_TIME_TOL * dt;
    let mut best: Option<(f64, DVector<f64>, usize)> = None;
    for i in 0..z.len() {
        let side = z_lo[i] > 0.0;
        let mut right = hi;
        if (z_hi[i] > 0.0) == side {
            // No net change; look for a double crossing through an extremum.
            let v_lo = sys.velocity(z_lo, h_tilde)[i];
            let v_hi = sys.velocity(z_hi, h_tilde)[i];
            let heading_out = if side { v_lo < 0.0 } else { v_lo > 0.0 };
            if !(heading_out && v_lo.signum() != v_hi.signum()) {
                continue;
            }
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                if b - a <= tol {
                    break;
                }
                let mid = 0.5 * (a + b);
                let v = sys.velocity(&at(mid)?, h_tilde)[i];
                if v.signum() == v_lo.signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            if (at(b)?[i] > 0.0) == side && (at(a)?[i] > 0.0) == side {
                continue;
            }
            right = b;
        }
        let (mut a, mut b) = (lo, right);
        let mut zb = at(b)?;
        for _ in 0..200 {
            if b - a <= tol {
                break;
            }
            let mid = 0.5 * (a + b);
            let zm = at(mid)?;
            if (zm[i] > 0.0) == side {
                a = mid;
            } else {
                b = mid;
                zb = zm;
            }
        }
        if best.as_ref().is_none_or(|(t, _, _)| b < *t) {
            best = Some((b, zb, i));
        }
    }
    Ok(best)
}

fn event_step(
    cache: &mut OperatorCache<'_>,
    traj: &mut Trajectory,
    z_start: &DVector<f64>,
    t0: f64,
    step_len: f64,
    drive: &DVector<f64>,
    k: usize,
) -> Result<DVector<f64>> {
    let dt = cache.dt;
    let zeno_cap = (ZENO_RATE * dt).ceil() as usize;
    let mut events_here = 0usize;
    let mut chatter = 0usize;
    let mut z = z_start.clone();
    let mut tau0 = 0.0;
    // Next grid index to emit.
    let mut j = 1usize;
    loop {
        let ctx = step_context(cache, &z, drive)?;
        let sys = cache.system(ctx.region)?.clone();
        let mut prev_tau = tau0;
        let mut prev_z = z.clone();
        let mut crossed = None;
        while j <= cache.substeps {
            let tau = cache.grid_time(j).min(step_len);
            if tau <= tau0 {
                j += 1;
                continue;
            }
            let zeta = sys.flow_with(&z, tau - tau0, &ctx.h_tilde).map_err(|e| with_step(e, k + 1))?;
            if let Some(c) = find_crossing(&sys, &z, &ctx.h_tilde, tau0, prev_tau, tau, &prev_z, &zeta, dt)? {
                crossed = Some(c);
                break;
            }
            traj.push(t0 + tau, zeta.clone())?;
            prev_tau = tau;
            prev_z = zeta;
            j += 1;
            if tau >= step_len {
                break;
            }
        }
        match crossed {
            None => return Ok(prev_z),
            Some((tau_e, z_e, coord)) => {
                events_here += 1;
                if events_here > zeno_cap {
                    return Err(Error::Zeno { events: events_here, dt });
                }
                chatter = if tau_e - tau0 <= EVENT_TIME_TOL * dt * 2.0 { chatter + 1 } else { 0 };
                if chatter > CHATTER_LIMIT {
                    return Err(Error::Zeno { events: events_here, dt });
                }
                let direction = if z_e[coord] > 0.0 { Direction::Up } else { Direction::Down };
                log::debug!("event at t={} coordinate {} {:?}", t0 + tau_e, coord + 1, direction);
                traj.events.push(Event {
                    time: t0 + tau_e,
                    coordinate: coord,
                    direction,
                });
                if traj.times.last().is_some_and(|&t| t < t0 + tau_e) {
                    traj.push(t0 + tau_e, z_e.clone())?;
                }
                z = z_e;
                tau0 = tau_e;
                if (step_len - tau0).abs() <= EVENT_TIME_TOL * dt {
                    return Ok(z);
                }
            }
        }
    }
}

/// `W~ p + h~` at each grid point under the point's own region.
pub fn sample_flow_field(converted: &ConvertedModel, grid: &[DVector<f64>]) -> Result<Vec<FlowSample>> {
    let mut systems: HashMap<u64, Cow<'_, ContinuousRegionSystem>> = HashMap::new();
    grid.iter()
        .map(|p| {
            let region = classify_state(p)?;
            if let Entry::Vacant(slot) = systems.entry(region.ordinal()) {
                slot.insert(converted.system_for(region)?);
            }
            let sys = &systems[&region.ordinal()];
            let velocity = sys.velocity(p, &sys.h_tilde);
            let scale = p.amax().max(1.0);
            Ok(FlowSample {
                is_equilibrium: velocity.amax() <= EQUILIBRIUM_TOL * scale,
                point: p.clone(),
                velocity,
                region,
            })
        })
        .collect()
}

/// Fixed points of every region map, admissible or virtual.
pub fn fixed_points(model: &PlrnnModel, converted: Option<&ConvertedModel>) -> Result<Vec<FixedPointSet>> {
    let mut out = Vec::new();
    for rs in enumerate_regions(model)? {
        let m = model.dim();
        let a = &rs.w_omega - DMatrix::identity(m, m);
        let rhs = -&rs.h;
        let scale = rs.w_omega.norm().max(1.0);
        let svd = a.clone().svd(true, true);
        let (u, v_t) = match (svd.u.as_ref(), svd.v_t.as_ref()) {
            (Some(u), Some(v)) => (u, v),
            _ => continue,
        };
        let tol = 1e-10 * scale;
        let mut point = DVector::zeros(m);
        let mut directions = Vec::new();
        for i in 0..svd.singular_values.len() {
            let s = svd.singular_values[i];
            let vi = v_t.row(i).transpose();
            if s > tol {
                point += &vi * (u.column(i).dot(&rhs) / s);
            } else {
                directions.push(vi);
            }
        }
        let consistency = (&a * &point - &rhs).amax();
        if consistency > 1e-9 * rs.h.amax().max(1.0) {
            continue;
        }
        let kind = if directions.is_empty() {
            FixedPointKind::Isolated
        } else {
            FixedPointKind::LineAttractorDirection
        };
        let admissible = match directions.len() {
            0 => Some(classify_state(&point)? == rs.region),
            1 => Some(line_meets_region(&point, &directions[0], rs.region)),
            _ => None,
        };
        let continuous_residual = converted
            .and_then(|c| c.system_for(rs.region).ok())
            .map(|sys| {
                let v = &sys.w_tilde * to_complex_vec(&point) + &sys.h_tilde;
                v.iter().map(|z| z.norm()).fold(0.0, f64::max)
            });
        out.push(FixedPointSet {
            region: rs.region,
            point,
            directions,
            kind,
            admissible,
            continuous_residual,
        });
    }
    Ok(out)
}

/// Whether `p + t d` lies in the region for some real `t`.
fn line_meets_region(p: &DVector<f64>, d: &DVector<f64>, region: RegionIndex) -> bool {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    // Strict bounds for gated coordinates are relaxed to closed ones; the
    // set is open there, so a nonempty closed interval with lo < hi suffices.
    let mut strict_point = false;
    for i in 0..p.len() {
        let positive = region.bit(i);
        let (pi, di) = (p[i], d[i]);
        if di.abs() <= 1e-14 {
            let ok = if positive { pi > 0.0 } else { pi <= 0.0 };
            if !ok {
                return false;
            }
            continue;
        }
        // positive: pi + t di > 0; otherwise pi + t di <= 0.
        let root = -pi / di;
        let upper = (di > 0.0) != positive;
        if upper {
            hi = hi.min(root);
        } else {
            lo = lo.max(root);
        }
        if positive {
            strict_point = true;
        }
    }
    if strict_point {
        lo < hi
    } else {
        lo <= hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convert::convert_model;

    fn addition() -> PlrnnModel {
        PlrnnModel::new(
            DVector::from_vec(vec![1.0, 0.01]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, -0.995]),
            1.0,
            None,
        )
        .unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn discrete_hand_iteration() {
        let t = simulate_discrete(&addition(), &v(&[0.0, 0.0]), 3, None).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.states[1], v(&[0.0, -0.995]));
        assert!((t.states[2][1] + 1.00495).abs() < 1e-14);
        // 0.01 * (-1.00495) - 0.995
        assert!((t.states[3][1] + 1.0050495).abs() < 1e-14);
        assert!(matches!(
            simulate_discrete(&addition(), &v(&[0.0, 0.0]), 0, None),
            Err(Error::EmptyTrajectory(_))
        ));
    }

    #[test]
    fn anchored_matches_discrete_on_grid() {
        let m = addition();
        let c = convert_model(&m).unwrap();
        let z0 = v(&[0.5, 0.7]);
        let d = simulate_discrete(&m, &z0, 20, None).unwrap();
        let ct = simulate_continuous(&m, &c, &z0, 20.0, SimulationMode::StepAnchored, Some(0.25), None).unwrap();
        assert_eq!(ct.len(), 81);
        for (k, zd) in d.states.iter().enumerate() {
            let zc = &ct.states[4 * k];
            assert!((zc - zd).amax() < 1e-8, "step {k}");
        }
    }

    #[test]
    fn event_driven_records_crossing() {
        // z2 starts positive and decays below zero inside the first step.
        let m = addition();
        let c = convert_model(&m).unwrap();
        let z0 = v(&[-1.0, 0.3]);
        let t = simulate_continuous(&m, &c, &z0, 2.0, SimulationMode::EventDriven, None, None).unwrap();
        assert!(!t.events.is_empty());
        let e = &t.events[0];
        assert_eq!(e.coordinate, 1);
        assert_eq!(e.direction, Direction::Down);
        assert!(t.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn line_attractor_fixed_points() {
        let m = addition();
        let fps = fixed_points(&m, None).unwrap();
        let lines: Vec<_> = fps.iter().filter(|f| f.kind == FixedPointKind::LineAttractorDirection).collect();
        assert_eq!(lines.len(), 2);
        for f in lines {
            assert!((f.point[1] + 0.995 / 0.99).abs() < 1e-12);
            assert!(f.directions[0][1].abs() < 1e-12);
            assert_eq!(f.admissible, Some(true));
        }
    }

    #[test]
    fn contraction_fixed_point() {
        let m = PlrnnModel::new(v(&[0.5]), DMatrix::zeros(1, 1), v(&[1.0]), 1.0, None).unwrap();
        let fps = fixed_points(&m, None).unwrap();
        assert_eq!(fps.len(), 2);
        assert!(fps.iter().all(|f| (f.point[0] - 2.0).abs() < 1e-14));
        // Only the positive region holds its own fixed point; the other is virtual.
        for f in &fps {
            assert_eq!(f.admissible, Some(f.region.bit(0)));
        }
    }

    #[test]
    fn flow_field_on_line_attractor() {
        let m = addition();
        let c = convert_model(&m).unwrap();
        let p = v(&[0.7, -0.995 / 0.99]);
        let s = sample_flow_field(&c, &[p]).unwrap();
        assert!(s[0].velocity.amax() <= 1e-10);
        assert!(s[0].is_equilibrium);
    }
}
