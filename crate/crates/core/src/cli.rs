//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on failure, 2 on usage errors and on a
//! partial conversion (some regions failed).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::analysis::{compare_trajectories, find_grazing_candidate, GrazingSearch};
use crate::convert::{convert_model, ConvertedModel};
use crate::dynamics::{sample_flow_field, simulate_continuous, simulate_discrete, SimulationMode};
use crate::error::Error;
use crate::io;
use crate::linalg::decompose;
use crate::model::{classify_state, enumerate_regions, PlrnnModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 2;

/// Largest flow-field grid accepted.
pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Debug, Parser)]
#[command(name = "plrnn-ct", version, about = "Convert ReLU recurrent networks to continuous-time systems and check their equivalence")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert every region and write the continuous systems with a report.
    Convert {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Run the discrete map and the step-anchored flow side by side.
    Compare(CompareArgs),
    /// Sample the continuous vector field on a grid.
    Flowfield {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated `zI=min:max:count` or `zI=value` entries; unlisted
        /// coordinates are frozen at 0.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        converted: Option<PathBuf>,
    },
    /// List the linear regions of a model.
    Regions {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Newton search for a grazing point on the border `z_s = 0`.
    Graze(GrazeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    StepAnchored,
    EventDriven,
    Discrete,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub z0: String,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, value_enum, default_value = "step-anchored")]
    pub mode: ModeArg,
    #[arg(long)]
    pub dense_dt: Option<f64>,
    /// CSV of inputs, one row per step.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Previously converted systems to use instead of converting again.
    #[arg(long)]
    pub converted: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the boundary events as CSV.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Initial state; drawn from `--seed` when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub z0: Option<String>,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    #[arg(long)]
    pub converted: Option<PathBuf>,
    /// Output directory for `discrete.csv`, `continuous.csv`,
    /// `residuals.csv` and `report.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GrazeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Newton seed; its region is the first side of the border.
    #[arg(long, allow_hyphen_values = true)]
    pub z0: String,
    /// Border coordinate, 1-based.
    #[arg(long)]
    pub border: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub converted: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.into())
    }
}

type CliResult = std::result::Result<i32, Failure>;

/// Sets up logging from `PLRNN_LOG` (`quiet`, `info`, `debug`; default warnings only).
pub fn init_logging() {
    let level = match std::env::var("PLRNN_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Convert { model, out } => cmd_convert(&model, &out),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Flowfield {
            model,
            grid,
            out,
            converted,
        } => cmd_flowfield(&model, &grid, &out, converted.as_deref()),
        Command::Regions { model, out } => cmd_regions(&model, out.as_deref()),
        Command::Graze(a) => cmd_graze(&a),
    }
}

fn parse_state(text: &str, dim: usize) -> std::result::Result<DVector<f64>, Failure> {
    let v: std::result::Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let v = v.map_err(|e| Failure::Usage(format!("--z0 `{text}`: {e}")))?;
    if v.len() != dim {
        return Err(Failure::Usage(format!("--z0 has {} entries, the model has dimension {dim}", v.len())));
    }
    Ok(DVector::from_vec(v))
}

fn load_converted(model: &PlrnnModel, path: Option<&Path>) -> crate::Result<ConvertedModel> {
    match path {
        Some(p) => {
            let c = io::read_converted(p)?;
            if c.dim() != model.dim() {
                return Err(Error::Dimension(format!(
                    "converted file has dimension {}, model {}",
                    c.dim(),
                    model.dim()
                )));
            }
            Ok(c)
        }
        None => convert_model(model),
    }
}

fn load_inputs(model: &PlrnnModel, path: Option<&Path>) -> crate::Result<Option<nalgebra::DMatrix<f64>>> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            Ok(Some(io::parse_inputs_csv(&text, model.input_dim())?))
        }
        None => Ok(None),
    }
}

fn write_json(path: &Path, v: &Value) -> crate::Result<()> {
    io::write_atomic(path, io::to_json_string(v).as_bytes())
}

fn cmd_convert(model_path: &Path, out: &Path) -> CliResult {
    let model = io::read_model(model_path)?;
    let conv = convert_model(&model)?;
    write_json(out, &io::converted_to_json(&conv, true))?;
    let report = conv.report();
    println!("converted={} failed={}", report.converted, report.failed.len());
    if report.failed.is_empty() {
        return Ok(EXIT_OK);
    }
    let listed: Vec<String> = report.failed.iter().map(u64::to_string).collect();
    println!("failed_ordinals={}", listed.join(","));
    for (k, e) in conv.failures() {
        eprintln!("region {k}: {e}");
    }
    Ok(EXIT_PARTIAL)
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult {
    let model = io::read_model(&a.model)?;
    let z0 = parse_state(&a.z0, model.dim())?;
    let inputs = load_inputs(&model, a.inputs.as_deref())?;
    if a.steps == 0 {
        return Err(Error::EmptyTrajectory("--steps must be at least 1".into()).into());
    }
    let traj = match a.mode {
        ModeArg::Discrete => simulate_discrete(&model, &z0, a.steps, inputs.as_ref())?,
        ModeArg::StepAnchored | ModeArg::EventDriven => {
            let conv = load_converted(&model, a.converted.as_deref())?;
            let mode = if a.mode == ModeArg::StepAnchored {
                SimulationMode::StepAnchored
            } else {
                SimulationMode::EventDriven
            };
            let t_end = a.steps as f64 * model.dt();
            simulate_continuous(&model, &conv, &z0, t_end, mode, a.dense_dt, inputs.as_ref())?
        }
    };
    io::write_atomic(&a.out, io::trajectory_csv(&traj).as_bytes())?;
    if let Some(p) = &a.events {
        io::write_atomic(p, io::events_csv(&traj.events).as_bytes())?;
    }
    println!("samples={} events={}", traj.len(), traj.events.len());
    Ok(EXIT_OK)
}

fn cmd_compare(a: &CompareArgs) -> CliResult {
    let model = io::read_model(&a.model)?;
    let z0 = match &a.z0 {
        Some(t) => parse_state(t, model.dim())?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            DVector::from_fn(model.dim(), |_, _| rng.gen_range(-2.0..2.0))
        }
    };
    if a.tol.is_nan() || a.tol < 0.0 {
        return Err(Failure::Usage(format!("--tol must be non-negative, got {}", a.tol)));
    }
    let inputs = load_inputs(&model, a.inputs.as_deref())?;
    let conv = load_converted(&model, a.converted.as_deref())?;
    let (discrete, continuous, residuals) = compare_trajectories(&model, &conv, &z0, a.steps, inputs.as_ref())?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);

    std::fs::create_dir_all(&a.out)?;
    io::write_atomic(&a.out.join("discrete.csv"), io::trajectory_csv(&discrete).as_bytes())?;
    io::write_atomic(&a.out.join("continuous.csv"), io::trajectory_csv(&continuous).as_bytes())?;
    let mut res = String::from("t,residual\n");
    for (t, r) in discrete.times.iter().zip(&residuals) {
        res.push_str(&format!("{},{}\n", io::format_num(*t), io::format_num(*r)));
    }
    io::write_atomic(&a.out.join("residuals.csv"), res.as_bytes())?;
    let mut visited = discrete.regions_visited();
    visited.extend(continuous.regions_visited());
    let report = json!({
        "z0": z0.as_slice(),
        "steps": a.steps,
        "max_residual": max_residual,
        "tolerance": a.tol,
        "passed": max_residual <= a.tol,
        "regions_visited": visited,
    });
    write_json(&a.out.join("report.json"), &report)?;

    println!("max_residual={}", io::format_num(max_residual));
    Ok(if max_residual <= a.tol { EXIT_OK } else { EXIT_FAILURE })
}

#[derive(Debug, Clone, PartialEq)]
enum Axis {
    Range { min: f64, max: f64, count: usize },
    Fixed(f64),
}

fn parse_grid(spec: &str, dim: usize) -> std::result::Result<Vec<Axis>, Failure> {
    let usage = |m: String| Failure::Usage(format!("--grid `{spec}`: {m}"));
    let mut axes = vec![Axis::Fixed(0.0); dim];
    let mut seen = vec![false; dim];
    for entry in spec.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let (name, value) = entry.split_once('=').ok_or_else(|| usage(format!("entry `{entry}` lacks `=`")))?;
        let idx: usize = name
            .trim()
            .strip_prefix('z')
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| usage(format!("`{name}` is not a coordinate name like z1")))?;
        if idx == 0 || idx > dim {
            return Err(usage(format!("coordinate z{idx} outside z1..z{dim}")));
        }
        if std::mem::replace(&mut seen[idx - 1], true) {
            return Err(usage(format!("coordinate z{idx} given twice")));
        }
        let parts: Vec<&str> = value.split(':').collect();
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| usage(format!("`{s}`: {e}")));
        axes[idx - 1] = match parts.as_slice() {
            [v] => Axis::Fixed(num(v)?),
            [lo, hi, n] => {
                let count: usize = n.trim().parse().map_err(|e| usage(format!("count `{n}`: {e}")))?;
                if count == 0 {
                    return Err(usage(format!("count for z{idx} must be at least 1")));
                }
                let (min, max) = (num(lo)?, num(hi)?);
                if !(min.is_finite() && max.is_finite()) || min > max {
                    return Err(usage(format!("range {min}:{max} for z{idx} is invalid")));
                }
                Axis::Range { min, max, count }
            }
            _ => return Err(usage(format!("`{value}` is neither min:max:count nor a value"))),
        };
    }
    Ok(axes)
}

fn grid_points(axes: &[Axis]) -> std::result::Result<Vec<DVector<f64>>, Failure> {
    let values: Vec<Vec<f64>> = axes
        .iter()
        .map(|a| match *a {
            Axis::Fixed(v) => vec![v],
            Axis::Range { min, count: 1, .. } => vec![min],
            Axis::Range { min, max, count } => {
                (0..count).map(|k| min + (max - min) * k as f64 / (count - 1) as f64).collect()
            }
        })
        .collect();
    let total = values
        .iter()
        .try_fold(1usize, |acc, v| acc.checked_mul(v.len()).filter(|&n| n <= MAX_GRID_POINTS));
    let total = total.ok_or_else(|| Failure::Run(Error::InvalidState(format!("grid exceeds {MAX_GRID_POINTS} points"))))?;
    // The first coordinate varies slowest.
    let mut points = Vec::with_capacity(total);
    for n in 0..total {
        let mut rem = n;
        let mut p = DVector::zeros(axes.len());
        for i in (0..axes.len()).rev() {
            let len = values[i].len();
            p[i] = values[i][rem % len];
            rem /= len;
        }
        points.push(p);
    }
    Ok(points)
}

fn cmd_flowfield(model_path: &Path, grid: &str, out: &Path, converted: Option<&Path>) -> CliResult {
    let model = io::read_model(model_path)?;
    let axes = parse_grid(grid, model.dim())?;
    let points = grid_points(&axes)?;
    let conv = load_converted(&model, converted)?;
    let samples = sample_flow_field(&conv, &points)?;
    io::write_atomic(out, io::flow_field_csv(&samples).as_bytes())?;
    let eq = samples.iter().filter(|s| s.is_equilibrium).count();
    println!("samples={} equilibria={eq}", samples.len());
    Ok(EXIT_OK)
}

fn cmd_regions(model_path: &Path, out: Option<&Path>) -> CliResult {
    let model = io::read_model(model_path)?;
    let regions = enumerate_regions(&model)?;
    let list: Vec<Value> = regions
        .iter()
        .map(|r| {
            let eigs = decompose(&r.w_omega).map(|d| d.eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).ok();
            let rows: Vec<Vec<f64>> = (0..r.w_omega.nrows()).map(|i| r.w_omega.row(i).iter().copied().collect()).collect();
            let neighbors: Vec<u64> = (0..model.dim()).map(|i| r.region.flip(i).ordinal()).collect();
            json!({
                "ordinal": r.region.ordinal(),
                "bits": r.region.to_string(),
                "w_omega": rows,
                "h": r.h.as_slice(),
                "eigenvalues": eigs,
                "neighbors": neighbors,
            })
        })
        .collect();
    let v = json!({ "dim": model.dim(), "regions": list });
    match out {
        Some(p) => write_json(p, &v)?,
        None => print!("{}", io::to_json_string(&v)),
    }
    Ok(EXIT_OK)
}

fn cmd_graze(a: &GrazeArgs) -> CliResult {
    let model = io::read_model(&a.model)?;
    let seed = parse_state(&a.z0, model.dim())?;
    if a.border == 0 || a.border > model.dim() {
        return Err(Failure::Usage(format!("--border must be in 1..={}", model.dim())));
    }
    let s = a.border - 1;
    let conv = load_converted(&model, a.converted.as_deref())?;
    let r1 = classify_state(&seed)?;
    let side_1 = conv.system_for(r1)?;
    let side_2 = conv.system_for(r1.flip(s))?;
    let search = GrazingSearch {
        tolerance: a.tol,
        rng_seed: a.seed,
        ..GrazingSearch::default()
    };
    let found = find_grazing_candidate(&side_1, &side_2, &seed, s, &search)?;
    let v = match &found {
        Some(c) => json!({
            "found": true,
            "border": a.border,
            "state": c.state.as_slice(),
            "iterations": c.iterations,
            "residuals": c.residuals,
        }),
        None => json!({ "found": false, "border": a.border }),
    };
    match &a.out {
        Some(p) => write_json(p, &v)?,
        None => print!("{}", io::to_json_string(&v)),
    }
    Ok(if found.is_some() { EXIT_OK } else { EXIT_FAILURE })
}
