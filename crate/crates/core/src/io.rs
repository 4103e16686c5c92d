//! File formats: JSON models and converted systems, CSV exports.
//!
//! Floating-point numbers are written with 17 significant digits so that
//! every `f64` survives a round trip. Files are written atomically.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::convert::{ContinuousRegionSystem, ConvertedModel, Realness, Theorem};
use crate::dynamics::{Direction, Event, FlowSample, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::model::{PlrnnModel, RegionIndex};

/// `x` with 17 significant digits; `nan`, `inf`, `-inf` for non-finite values.
pub fn format_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON with every float printed by [`format_num`] (non-finite as `null`).
pub fn to_json_string(v: &Value) -> String {
    let mut out = String::new();
    emit(v, 0, &mut out);
    out.push('\n');
    out
}

fn emit(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let x = n.as_f64().unwrap_or(f64::NAN);
                if x.is_finite() {
                    out.push_str(&format_num(x));
                } else {
                    out.push_str("null");
                }
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap_or_default()),
        Value::Array(a) => {
            // Arrays of scalars stay on one line.
            if a.iter().all(|x| !x.is_array() && !x.is_object()) {
                out.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    emit(x, indent, out);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (i, x) in a.iter().enumerate() {
                    out.push_str(&pad(indent + 1));
                    emit(x, indent + 1, out);
                    if i + 1 < a.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                out.push_str(&pad(indent));
                out.push(']');
            }
        }
        Value::Object(o) => {
            if o.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in o.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).unwrap_or_default());
                out.push_str(": ");
                emit(x, indent + 1, out);
                if i + 1 < o.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    dim: usize,
    a_diag: Vec<f64>,
    w: Vec<Vec<f64>>,
    h: Vec<f64>,
    dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<Vec<f64>>>,
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("field `{name}` must be a {nrows}x{ncols} array of rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn parse_model(text: &str) -> Result<PlrnnModel> {
    let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
    let m = f.dim;
    if m == 0 {
        return Err(Error::Parse("field `dim` must be at least 1".into()));
    }
    if f.a_diag.len() != m {
        return Err(Error::Parse(format!("field `a_diag` has length {}, expected {m}", f.a_diag.len())));
    }
    if f.h.len() != m {
        return Err(Error::Parse(format!("field `h` has length {}, expected {m}", f.h.len())));
    }
    let w = rows_to_matrix("w", &f.w, m, m)?;
    let k = f.input_dim.unwrap_or(0);
    let c = match (k, &f.c) {
        (0, None) => None,
        (0, Some(_)) => return Err(Error::Parse("field `c` given but `input_dim` is 0 or absent".into())),
        (_, None) => return Err(Error::Parse("field `c` is required when `input_dim` > 0".into())),
        (k, Some(rows)) => Some(rows_to_matrix("c", rows, m, k)?),
    };
    PlrnnModel::new(DVector::from_vec(f.a_diag), w, DVector::from_vec(f.h), f.dt, c)
}

pub fn model_to_json(model: &PlrnnModel) -> Value {
    let f = ModelFile {
        dim: model.dim(),
        a_diag: model.a_diag().iter().copied().collect(),
        w: matrix_to_rows(model.w()),
        h: model.h().iter().copied().collect(),
        dt: model.dt(),
        input_dim: (model.input_dim() > 0).then(|| model.input_dim()),
        c: model.c().map(matrix_to_rows),
    };
    serde_json::to_value(f).expect("model serializes")
}

pub fn read_model(path: &Path) -> Result<PlrnnModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}

type Pair = [f64; 2];

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RegionFile {
    ordinal: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bits: Option<String>,
    w_tilde: Vec<Vec<Pair>>,
    h_tilde: Vec<Pair>,
    theorem: Theorem,
    #[serde(default)]
    unit_eig_count: usize,
    realness: Realness,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ConvertedFile {
    dim: usize,
    dt: f64,
    regions: Vec<RegionFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    report: Option<Value>,
}

fn pair(z: Complex64) -> Pair {
    [z.re, z.im]
}

pub fn converted_to_json(conv: &ConvertedModel, include_report: bool) -> Value {
    let regions = conv
        .systems()
        .values()
        .map(|s| RegionFile {
            ordinal: s.region.ordinal(),
            bits: Some(s.region.to_string()),
            w_tilde: (0..s.dim()).map(|i| s.w_tilde.row(i).iter().map(|&z| pair(z)).collect()).collect(),
            h_tilde: s.h_tilde.iter().map(|&z| pair(z)).collect(),
            theorem: s.theorem,
            unit_eig_count: s.unit_eig_count,
            realness: s.realness,
        })
        .collect();
    let f = ConvertedFile {
        dim: conv.dim(),
        dt: conv.dt(),
        regions,
        report: include_report.then(|| serde_json::to_value(conv.report()).expect("report serializes")),
    };
    serde_json::to_value(f).expect("converted model serializes")
}

pub fn parse_converted(text: &str) -> Result<ConvertedModel> {
    let f: ConvertedFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("converted file: {e}")))?;
    let m = f.dim;
    let mut systems = Vec::with_capacity(f.regions.len());
    for r in f.regions {
        let region = RegionIndex::from_ordinal(r.ordinal, m)?;
        if r.w_tilde.len() != m || r.w_tilde.iter().any(|row| row.len() != m) || r.h_tilde.len() != m {
            return Err(Error::Parse(format!("region {} has inconsistent dimensions", r.ordinal)));
        }
        let w = CMat::from_fn(m, m, |i, j| Complex64::new(r.w_tilde[i][j][0], r.w_tilde[i][j][1]));
        let h = CVec::from_fn(m, |i, _| Complex64::new(r.h_tilde[i][0], r.h_tilde[i][1]));
        systems.push(ContinuousRegionSystem::from_parts(
            region,
            w,
            h,
            f.dt,
            r.theorem,
            r.unit_eig_count,
            r.realness,
        )?);
    }
    ConvertedModel::from_systems(m, f.dt, systems)
}

pub fn read_converted(path: &Path) -> Result<ConvertedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_converted(&text)
}

/// Header `t,z1..zM,region_ordinal`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let m = traj.states.first().map_or(0, |s| s.len());
    let mut out = String::from("t");
    for i in 1..=m {
        let _ = write!(out, ",z{i}");
    }
    out.push_str(",region_ordinal\n");
    for ((t, z), r) in traj.times.iter().zip(&traj.states).zip(&traj.regions) {
        out.push_str(&format_num(*t));
        for x in z.iter() {
            out.push(',');
            out.push_str(&format_num(*x));
        }
        let _ = writeln!(out, ",{}", r.ordinal());
    }
    out
}

/// Header `t,coordinate,direction`; coordinates are 1-based.
pub fn events_csv(events: &[Event]) -> String {
    let mut out = String::from("t,coordinate,direction\n");
    for e in events {
        let d = match e.direction {
            Direction::Up => "up",
            Direction::Down => "down",
        };
        let _ = writeln!(out, "{},{},{d}", format_num(e.time), e.coordinate + 1);
    }
    out
}

/// Header `p1..pM,v1..vM,region_ordinal,equilibrium`.
pub fn flow_field_csv(samples: &[FlowSample]) -> String {
    let m = samples.first().map_or(0, |s| s.point.len());
    let mut cols: Vec<String> = (1..=m).map(|i| format!("p{i}")).collect();
    cols.extend((1..=m).map(|i| format!("v{i}")));
    cols.push("region_ordinal".into());
    cols.push("equilibrium".into());
    let mut out = cols.join(",");
    out.push('\n');
    for s in samples {
        let nums: Vec<String> = s.point.iter().chain(s.velocity.iter()).map(|&x| format_num(x)).collect();
        let _ = writeln!(out, "{},{},{}", nums.join(","), s.region.ordinal(), u8::from(s.is_equilibrium));
    }
    out
}

/// Input sequence CSV: one row per step, one column per input, optional header.
pub fn parse_inputs_csv(text: &str, input_dim: usize) -> Result<DMatrix<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => {
                if v.len() != input_dim {
                    return Err(Error::Parse(format!(
                        "inputs line {}: {} values, expected {input_dim}",
                        n + 1,
                        v.len()
                    )));
                }
                cols.push(v);
            }
            Err(_) if cols.is_empty() && n == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("inputs line {}: {e}", n + 1))),
        }
    }
    Ok(DMatrix::from_fn(input_dim, cols.len(), |i, j| cols[j][i]))
}
