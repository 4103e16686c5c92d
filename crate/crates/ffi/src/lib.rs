//! C ABI over `plrnn-ct`.
//!
//! Models and converted models are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns a
//! [`PlrnnStatus`]; on failure the message is available from
//! [`plrnn_last_error`] on the same thread. Matrices cross the boundary as
//! row-major `double` arrays and trajectories as `(steps + 1) * dim` row-major
//! buffers supplied by the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use plrnn_ct::convert::{convert_model, ConvertedModel};
use plrnn_ct::dynamics::{simulate_continuous, simulate_discrete, SimulationMode, Trajectory};
use plrnn_ct::linalg::{real_log_exists, RealLogKind};
use plrnn_ct::model::PlrnnModel;
use plrnn_ct::{analysis, io, Error};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlrnnStatus {
    Ok = 0,
    /// Some regions failed to convert; the handle is still usable.
    Partial = 1,
    NullPointer = 2,
    InvalidArgument = 3,
    Parse = 4,
    NotConvertible = 5,
    Numerical = 6,
    Simulation = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Continuous simulation mode.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlrnnMode {
    StepAnchored = 0,
    EventDriven = 1,
}

/// Verdict on the existence of a real matrix logarithm.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlrnnRealLog {
    Yes = 0,
    No = 1,
    Singular = 2,
}

/// Opaque discrete model.
pub struct PlrnnModelHandle {
    inner: PlrnnModel,
}

/// Opaque converted (continuous-time) model.
pub struct PlrnnConvertedHandle {
    inner: ConvertedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PlrnnStatus {
    match e {
        Error::Parse(_) | Error::Io(_) => PlrnnStatus::Parse,
        Error::Dimension(_) | Error::InvalidModel(_) | Error::InvalidState(_) | Error::EnumerationCap { .. } => {
            PlrnnStatus::InvalidArgument
        }
        Error::NotConvertible { .. } | Error::ModelNotConvertible { .. } | Error::MissingRegion { .. } => {
            PlrnnStatus::NotConvertible
        }
        Error::Decomposition { .. }
        | Error::Singular { .. }
        | Error::Accuracy { .. }
        | Error::IntegralSingular { .. }
        | Error::ComplexSystem(_)
        | Error::Newton(_) => PlrnnStatus::Numerical,
        Error::Overflow { .. } | Error::ImaginaryResidue { .. } | Error::Zeno { .. } | Error::EmptyTrajectory(_) => {
            PlrnnStatus::Simulation
        }
    }
}

struct Fail(PlrnnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PlrnnStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error or panic and converts it to a status.
fn guard(f: impl FnOnce() -> Result<PlrnnStatus, Fail>) -> PlrnnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PlrnnStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(PlrnnStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn model_ref<'a>(m: *const PlrnnModelHandle) -> Result<&'a PlrnnModel, Fail> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn converted_ref<'a>(c: *const PlrnnConvertedHandle) -> Result<&'a ConvertedModel, Fail> {
    c.as_ref().map(|c| &c.inner).ok_or_else(|| null("converted model"))
}

fn into_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(PlrnnStatus::Numerical, "output contains a NUL byte".into()))
}

unsafe fn state(z0: *const f64, dim: usize, model: &PlrnnModel) -> Result<DVector<f64>, Fail> {
    if dim != model.dim() {
        return Err(Fail(
            PlrnnStatus::InvalidArgument,
            format!("state length {dim} does not match model dimension {}", model.dim()),
        ));
    }
    Ok(DVector::from_column_slice(read_slice(z0, dim, "z0")?))
}

/// Writes the states at `t = k dt`, `k = 0..=steps`, row by row.
unsafe fn write_grid(traj: &Trajectory, dt: f64, steps: usize, dim: usize, out: *mut f64, out_len: usize) -> Result<(), Fail> {
    let need = (steps + 1) * dim;
    if out.is_null() {
        return Err(null("out"));
    }
    if out_len < need {
        return Err(Fail(PlrnnStatus::BufferTooSmall, format!("output needs {need} doubles, got {out_len}")));
    }
    let buf = std::slice::from_raw_parts_mut(out, need);
    for k in 0..=steps {
        let z = traj
            .state_near(k as f64 * dt)
            .ok_or_else(|| Fail(PlrnnStatus::Simulation, "trajectory is empty".into()))?;
        buf[k * dim..(k + 1) * dim].copy_from_slice(z.as_slice());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn plrnn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn plrnn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plrnn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a model from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plrnn_model_from_json(json: *const c_char, out: *mut *mut PlrnnModelHandle) -> PlrnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = io::parse_model(read_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(PlrnnModelHandle { inner: model }));
        Ok(PlrnnStatus::Ok)
    })
}

/// Builds a model from arrays. `w` is `dim x dim` row-major; `c` is
/// `dim x input_dim` row-major and may be null when `input_dim` is 0.
///
/// # Safety
/// Every non-null pointer must reference an array of the stated length.
#[no_mangle]
pub unsafe extern "C" fn plrnn_model_new(
    dim: usize,
    a_diag: *const f64,
    w: *const f64,
    h: *const f64,
    dt: f64,
    input_dim: usize,
    c: *const f64,
    out: *mut *mut PlrnnModelHandle,
) -> PlrnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = DVector::from_column_slice(read_slice(a_diag, dim, "a_diag")?);
        let w = DMatrix::from_row_slice(dim, dim, read_slice(w, dim * dim, "w")?);
        let h = DVector::from_column_slice(read_slice(h, dim, "h")?);
        let c = if input_dim == 0 {
            None
        } else {
            Some(DMatrix::from_row_slice(dim, input_dim, read_slice(c, dim * input_dim, "c")?))
        };
        let model = PlrnnModel::new(a, w, h, dt, c)?;
        *out = Box::into_raw(Box::new(PlrnnModelHandle { inner: model }));
        Ok(PlrnnStatus::Ok)
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plrnn_model_free(model: *mut PlrnnModelHandle) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Latent dimension of the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn plrnn_model_dim(model: *const PlrnnModelHandle) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Serializes the model; release the result with [`plrnn_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plrnn_model_to_json(model: *const PlrnnModelHandle, out: *mut *mut c_char) -> PlrnnStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(io::to_json_string(&io::model_to_json(m)))?;
        Ok(PlrnnStatus::Ok)
    })
}

/// Converts every region. Returns `PLRNN_STATUS_PARTIAL` with a usable handle
/// when some regions fail; see [`plrnn_converted_failed_count`].
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plrnn_convert(model: *const PlrnnModelHandle, out: *mut *mut PlrnnConvertedHandle) -> PlrnnStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let conv = convert_model(m)?;
        let failed = conv.failures().len();
        if failed > 0 {
            let ordinals: Vec<String> = conv.failures().keys().map(u64::to_string).collect();
            set_error(format!("{failed} regions failed to convert: {}", ordinals.join(",")));
        }
        *out = Box::into_raw(Box::new(PlrnnConvertedHandle { inner: conv }));
        Ok(if failed > 0 { PlrnnStatus::Partial } else { PlrnnStatus::Ok })
    })
}

/// Parses a converted model written by [`plrnn_converted_to_json`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plrnn_converted_from_json(json: *const c_char, out: *mut *mut PlrnnConvertedHandle) -> PlrnnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let conv = io::parse_converted(read_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(PlrnnConvertedHandle { inner: conv }));
        Ok(PlrnnStatus::Ok)
    })
}

/// Serializes the converted model, optionally with the per-region report.
///
/// # Safety
/// `conv` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plrnn_converted_to_json(
    conv: *const PlrnnConvertedHandle,
    include_report: bool,
    out: *mut *mut c_char,
) -> PlrnnStatus {
    guard(|| {
        let c = converted_ref(conv)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(io::to_json_string(&io::converted_to_json(c, include_report)))?;
        Ok(PlrnnStatus::Ok)
    })
}

/// Number of regions that failed to convert, or 0 for a null handle.
///
/// # Safety
/// `conv` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn plrnn_converted_failed_count(conv: *const PlrnnConvertedHandle) -> usize {
    conv.as_ref().map_or(0, |c| c.inner.failures().len())
}

/// # Safety
/// `conv` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plrnn_converted_free(conv: *mut PlrnnConvertedHandle) {
    if !conv.is_null() {
        drop(Box::from_raw(conv));
    }
}

/// Iterates the map `steps` times from `z0` and writes the `steps + 1` states
/// row by row into `out`, which must hold `(steps + 1) * dim` doubles.
///
/// # Safety
/// `z0` must hold `dim` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn plrnn_simulate_discrete(
    model: *const PlrnnModelHandle,
    z0: *const f64,
    dim: usize,
    steps: usize,
    out: *mut f64,
    out_len: usize,
) -> PlrnnStatus {
    guard(|| {
        let m = model_ref(model)?;
        let z0 = state(z0, dim, m)?;
        let traj = simulate_discrete(m, &z0, steps, None)?;
        write_grid(&traj, m.dt(), steps, dim, out, out_len)?;
        Ok(PlrnnStatus::Ok)
    })
}

/// Runs the continuous flow over `steps * dt` and writes the states at the
/// step times, laid out as in [`plrnn_simulate_discrete`].
///
/// # Safety
/// `z0` must hold `dim` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn plrnn_simulate_continuous(
    model: *const PlrnnModelHandle,
    conv: *const PlrnnConvertedHandle,
    z0: *const f64,
    dim: usize,
    steps: usize,
    mode: PlrnnMode,
    out: *mut f64,
    out_len: usize,
) -> PlrnnStatus {
    guard(|| {
        let m = model_ref(model)?;
        let c = converted_ref(conv)?;
        let z0 = state(z0, dim, m)?;
        let mode = match mode {
            PlrnnMode::StepAnchored => SimulationMode::StepAnchored,
            PlrnnMode::EventDriven => SimulationMode::EventDriven,
        };
        let t_end = steps as f64 * m.dt();
        let traj = simulate_continuous(m, c, &z0, t_end, mode, Some(m.dt()), None)?;
        write_grid(&traj, m.dt(), steps, dim, out, out_len)?;
        Ok(PlrnnStatus::Ok)
    })
}

/// Largest max-norm gap between the discrete and step-anchored continuous
/// trajectories over `steps` steps from `z0`.
///
/// # Safety
/// `z0` must hold `dim` doubles and `max_residual` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plrnn_compare(
    model: *const PlrnnModelHandle,
    conv: *const PlrnnConvertedHandle,
    z0: *const f64,
    dim: usize,
    steps: usize,
    max_residual: *mut f64,
) -> PlrnnStatus {
    guard(|| {
        let m = model_ref(model)?;
        let c = converted_ref(conv)?;
        let z0 = state(z0, dim, m)?;
        if max_residual.is_null() {
            return Err(null("max_residual"));
        }
        let (_, _, residuals) = analysis::compare_trajectories(m, c, &z0, steps, None)?;
        *max_residual = residuals.into_iter().fold(0.0, f64::max);
        Ok(PlrnnStatus::Ok)
    })
}

/// Decides whether the `n x n` row-major matrix `a` has a real logarithm.
///
/// # Safety
/// `a` must hold `n * n` doubles and `verdict` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plrnn_real_log_exists(a: *const f64, n: usize, verdict: *mut PlrnnRealLog) -> PlrnnStatus {
    guard(|| {
        if verdict.is_null() {
            return Err(null("verdict"));
        }
        if n == 0 {
            return Err(Fail(PlrnnStatus::InvalidArgument, "matrix is empty".into()));
        }
        let m = DMatrix::from_row_slice(n, n, read_slice(a, n * n, "a")?);
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Fail(PlrnnStatus::InvalidArgument, "matrix has non-finite entries".into()));
        }
        *verdict = match real_log_exists(&m).kind {
            RealLogKind::Yes => PlrnnRealLog::Yes,
            RealLogKind::No => PlrnnRealLog::No,
            RealLogKind::NoSingular => PlrnnRealLog::Singular,
        };
        Ok(PlrnnStatus::Ok)
    })
}
