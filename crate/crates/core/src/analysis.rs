//! Whole-model equivalence checks and the local grazing conditions at a
//! switching boundary `z_s = 0`.
//!
//! With `H(z) = z_s` the gradient is the unit vector `e_s` and the Hessian
//! vanishes, so the conditions reduce to
//! `z*_s = 0`, `(W~ z* + h~)_s = 0` and the sign of `(W~^2 z* + W~ h~)_s`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::convert::{ContinuousRegionSystem, ConvertedModel};
use crate::dynamics::{simulate_continuous, simulate_discrete, SimulationMode, Trajectory};
use crate::error::{Error, Result};
use crate::model::PlrnnModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEquivalence {
    pub z0: Vec<f64>,
    pub max_residual: f64,
    pub residual_at_step: Vec<f64>,
    pub regions_visited: BTreeSet<u64>,
    /// Largest state gap between the two continuous modes on the step grid.
    pub mode_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub trajectories: Vec<TrajectoryEquivalence>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceOptions {
    /// Also run the event-driven flow and record the gap to the step-anchored one.
    pub mode_gap: bool,
    /// Grid spacing for the event-driven run.
    pub dense_dt: Option<f64>,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        EquivalenceOptions {
            mode_gap: true,
            dense_dt: None,
        }
    }
}

/// Discrete run, step-anchored continuous run and residual on the step grid
/// for one initial state.
pub fn compare_trajectories(
    model: &PlrnnModel,
    converted: &ConvertedModel,
    z0: &DVector<f64>,
    steps: usize,
    inputs: Option<&DMatrix<f64>>,
) -> Result<(Trajectory, Trajectory, Vec<f64>)> {
    let discrete = simulate_discrete(model, z0, steps, inputs)?;
    let t_end = steps as f64 * model.dt();
    let continuous = simulate_continuous(
        model,
        converted,
        z0,
        t_end,
        SimulationMode::StepAnchored,
        Some(model.dt()),
        inputs,
    )?;
    let residuals = discrete
        .states
        .iter()
        .zip(&continuous.states)
        .map(|(a, b)| (a - b).amax())
        .collect();
    Ok((discrete, continuous, residuals))
}

pub fn run_equivalence_suite(
    model: &PlrnnModel,
    converted: &ConvertedModel,
    initial_states: &[DVector<f64>],
    steps: usize,
    options: EquivalenceOptions,
) -> Result<EquivalenceReport> {
    if initial_states.is_empty() {
        return Err(Error::EmptyTrajectory("no initial states".into()));
    }
    let mut trajectories = Vec::with_capacity(initial_states.len());
    for z0 in initial_states {
        let (discrete, anchored, residual_at_step) = compare_trajectories(model, converted, z0, steps, None)?;
        let max_residual = residual_at_step.iter().cloned().fold(0.0, f64::max);
        let mode_gap = if options.mode_gap {
            let t_end = steps as f64 * model.dt();
            match simulate_continuous(model, converted, z0, t_end, SimulationMode::EventDriven, options.dense_dt, None) {
                Ok(ev) => Some(
                    anchored
                        .states
                        .iter()
                        .enumerate()
                        .map(|(k, za)| {
                            ev.state_near(k as f64 * model.dt())
                                .map_or(f64::INFINITY, |ze| (za - ze).amax())
                        })
                        .fold(0.0, f64::max),
                ),
                Err(e) => {
                    log::warn!("event-driven run from {:?} failed: {e}", z0.as_slice());
                    None
                }
            }
        } else {
            None
        };
        let mut regions_visited = discrete.regions_visited();
        regions_visited.extend(anchored.regions_visited());
        trajectories.push(TrajectoryEquivalence {
            z0: z0.iter().copied().collect(),
            max_residual,
            residual_at_step,
            regions_visited,
            mode_gap,
        });
    }
    let max_residual = trajectories.iter().map(|t| t.max_residual).fold(0.0, f64::max);
    Ok(EquivalenceReport {
        trajectories,
        max_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrazingResiduals {
    pub on_border: f64,
    pub gradient_norm: f64,
    pub tangency_1: f64,
    pub tangency_2: f64,
    pub curvature_1: f64,
    pub curvature_2: f64,
}

impl GrazingResiduals {
    /// Largest of `|on_border|`, `|tangency_i|` and, if asked, `|curvature_i|`.
    pub fn max_abs(&self, include_curvature: bool) -> f64 {
        let mut m = self.on_border.abs().max(self.tangency_1.abs()).max(self.tangency_2.abs());
        if include_curvature {
            m = m.max(self.curvature_1.abs()).max(self.curvature_2.abs());
        }
        m
    }
}

fn real_parts(sys: &ContinuousRegionSystem, which: &str) -> Result<(DMatrix<f64>, DVector<f64>)> {
    match (sys.w_tilde_real(), sys.h_tilde_real()) {
        (Some(w), Some(h)) => Ok((w, h)),
        _ => Err(Error::ComplexSystem(format!("{which} side of region {} is complex", sys.region))),
    }
}

/// Border coordinate `s` is 0-based.
pub fn grazing_residuals(
    side_1: &ContinuousRegionSystem,
    side_2: &ContinuousRegionSystem,
    zeta_star: &DVector<f64>,
    s: usize,
) -> Result<GrazingResiduals> {
    let (w1, h1) = real_parts(side_1, "first")?;
    let (w2, h2) = real_parts(side_2, "second")?;
    let m = zeta_star.len();
    if w1.nrows() != m || w2.nrows() != m {
        return Err(Error::Dimension(format!("state has length {m}, systems {}", w1.nrows())));
    }
    if s >= m {
        return Err(Error::Dimension(format!("border coordinate {} outside 1..={m}", s + 1)));
    }
    let terms = |w: &DMatrix<f64>, h: &DVector<f64>| {
        let f = w * zeta_star + h;
        let tangency = f[s];
        let curvature = (w * &f)[s];
        (tangency, curvature)
    };
    let (tangency_1, curvature_1) = terms(&w1, &h1);
    let (tangency_2, curvature_2) = terms(&w2, &h2);
    Ok(GrazingResiduals {
        on_border: zeta_star[s],
        gradient_norm: 1.0,
        tangency_1,
        tangency_2,
        curvature_1,
        curvature_2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrazingSearch {
    /// Second coordinate of the Newton plane; by default the one with the
    /// largest `|W~_1[s, p]|`.
    pub plane_coordinate: Option<usize>,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub restarts: usize,
    /// Scale of the random seed perturbation on restart.
    pub perturbation: f64,
    pub rng_seed: u64,
}

impl Default for GrazingSearch {
    fn default() -> Self {
        GrazingSearch {
            plane_coordinate: None,
            max_iterations: 100,
            tolerance: 1e-8,
            restarts: 3,
            perturbation: 1e-2,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrazingCandidate {
    pub state: DVector<f64>,
    pub residuals: GrazingResiduals,
    pub iterations: usize,
}

/// Damped Newton on `(z_s, (W~_1 z + h~_1)_s) = 0` over the plane of
/// coordinates `s` and `p` through the seed. `None` when no attempt reaches
/// the tolerance.
pub fn find_grazing_candidate(
    side_1: &ContinuousRegionSystem,
    side_2: &ContinuousRegionSystem,
    seed: &DVector<f64>,
    s: usize,
    search: &GrazingSearch,
) -> Result<Option<GrazingCandidate>> {
    let (w1, h1) = real_parts(side_1, "first")?;
    real_parts(side_2, "second")?;
    let m = seed.len();
    if s >= m || w1.nrows() != m {
        return Err(Error::Dimension(format!("border coordinate {} for state of length {m}", s + 1)));
    }
    if !seed.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidState("seed must be finite".into()));
    }
    if m < 2 {
        return Err(Error::Dimension("grazing search needs at least two coordinates".into()));
    }
    let p = match search.plane_coordinate {
        Some(p) if p < m && p != s => p,
        Some(p) => return Err(Error::Dimension(format!("plane coordinate {} invalid", p + 1))),
        None => (0..m)
            .filter(|&j| j != s)
            .max_by(|&a, &b| w1[(s, a)].abs().total_cmp(&w1[(s, b)].abs()))
            .unwrap(),
    };
    let residual = |z: &DVector<f64>| -> [f64; 2] { [z[s], (&w1 * z + &h1)[s]] };
    let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let mut rng = ChaCha8Rng::seed_from_u64(search.rng_seed);

    for attempt in 0..=search.restarts {
        let mut z = seed.clone();
        if attempt > 0 {
            z[s] += search.perturbation * rng.gen_range(-1.0..1.0);
            z[p] += search.perturbation * rng.gen_range(-1.0..1.0);
        }
        // Jacobian over (z_s, z_p): [[1, 0], [w_ss, w_sp]].
        let (a, b) = (w1[(s, s)], w1[(s, p)]);
        let det = b;
        if det.abs() <= 1e-14 * w1.amax().max(1.0) {
            log::warn!("grazing Newton: singular Jacobian (attempt {})", attempt + 1);
            continue;
        }
        let mut r = residual(&z);
        for it in 0..search.max_iterations {
            if norm(r) <= search.tolerance {
                let residuals = grazing_residuals(side_1, side_2, &z, s)?;
                return Ok(Some(GrazingCandidate {
                    state: z,
                    residuals,
                    iterations: it,
                }));
            }
            let ds = -r[0];
            let dp = (-r[1] - a * ds) / det;
            let mut lambda = 1.0;
            loop {
                let mut trial = z.clone();
                trial[s] += lambda * ds;
                trial[p] += lambda * dp;
                let rt = residual(&trial);
                if norm(rt) < norm(r) || lambda < 1e-6 {
                    z = trial;
                    r = rt;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if norm(r) <= search.tolerance {
            let residuals = grazing_residuals(side_1, side_2, &z, s)?;
            return Ok(Some(GrazingCandidate {
                state: z,
                residuals,
                iterations: search.max_iterations,
            }));
        }
    }
    Ok(None)
}

/// Extremes of one coordinate along a densely sampled closed-form orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BorderSampling {
    pub min_value: f64,
    pub argmin_time: f64,
    pub sign_changes: usize,
}

/// Samples `z_s(t)` of one region's flow from `z0` at `samples + 1` evenly
/// spaced times over `[0, horizon]`, ignoring region switches.
pub fn sample_border_coordinate(
    sys: &ContinuousRegionSystem,
    z0: &DVector<f64>,
    s: usize,
    horizon: f64,
    samples: usize,
) -> Result<BorderSampling> {
    if samples == 0 || horizon.is_nan() || horizon <= 0.0 {
        return Err(Error::InvalidState("need a positive horizon and at least one sample".into()));
    }
    let mut min_value = z0[s];
    let mut argmin_time = 0.0;
    let mut sign_changes = 0;
    let mut prev = z0[s];
    let h = horizon / samples as f64;
    // Operators are only built for times up to one step.
    let inner = (h / sys.dt).ceil().max(1.0) as usize;
    let op = sys.flow_operator(h / inner as f64)?;
    let mut z = z0.clone();
    for k in 1..=samples {
        for _ in 0..inner {
            z = op.apply(&z, &sys.h_tilde)?;
        }
        let x = z[s];
        if x < min_value {
            min_value = x;
            argmin_time = k as f64 * h;
        }
        if (x > 0.0) != (prev > 0.0) {
            sign_changes += 1;
        }
        prev = x;
    }
    Ok(BorderSampling {
        min_value,
        argmin_time,
        sign_changes,
    })
}

/// Border-coordinate minimum along the orbit for each parameter value.
pub fn sweep_border_minimum<F>(values: &[f64], mut build: F, s: usize, horizon: f64, samples: usize) -> Result<Vec<(f64, BorderSampling)>>
where
    F: FnMut(f64) -> Result<(ContinuousRegionSystem, DVector<f64>)>,
{
    values
        .iter()
        .map(|&v| {
            let (sys, z0) = build(v)?;
            Ok((v, sample_border_coordinate(&sys, &z0, s, horizon, samples)?))
        })
        .collect()
}
