use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use plrnn_ct_ffi::*;

const TWO_UNIT: &str = r#"{"dim":2,"a_diag":[0.5,0.6],"w":[[0.1,-0.2],[0.3,0.2]],"h":[0.1,-0.4],"dt":1.0}"#;
const SINGULAR: &str = r#"{"dim":2,"a_diag":[0.5,0.5],"w":[[-0.5,0.0],[0.0,0.0]],"h":[0.1,0.2],"dt":1.0}"#;

fn last_error() -> String {
    let p = plrnn_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(json: &str) -> *mut PlrnnModelHandle {
    let text = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { plrnn_model_from_json(text.as_ptr(), &mut m) }, PlrnnStatus::Ok);
    m
}

#[test]
fn discrete_and_continuous_agree_through_the_abi() {
    let m = load(TWO_UNIT);
    assert_eq!(unsafe { plrnn_model_dim(m) }, 2);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { plrnn_convert(m, &mut c) }, PlrnnStatus::Ok);
    assert_eq!(unsafe { plrnn_converted_failed_count(c) }, 0);

    let z0 = [0.7, -0.3];
    let steps = 20;
    let mut d = vec![0.0; (steps + 1) * 2];
    let mut k = vec![0.0; (steps + 1) * 2];
    unsafe {
        assert_eq!(plrnn_simulate_discrete(m, z0.as_ptr(), 2, steps, d.as_mut_ptr(), d.len()), PlrnnStatus::Ok);
        assert_eq!(
            plrnn_simulate_continuous(m, c, z0.as_ptr(), 2, steps, PlrnnMode::StepAnchored, k.as_mut_ptr(), k.len()),
            PlrnnStatus::Ok
        );
    }
    // first step by hand: A z + W relu(z) + h with relu(z) = (0.7, 0)
    assert!((d[2] - (0.35 + 0.07 + 0.1)).abs() < 1e-15);
    assert!((d[3] - (-0.18 + 0.21 - 0.4)).abs() < 1e-15);
    let gap = d.iter().zip(&k).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-8, "gap {gap}");

    let mut r = f64::NAN;
    assert_eq!(unsafe { plrnn_compare(m, c, z0.as_ptr(), 2, steps, &mut r) }, PlrnnStatus::Ok);
    assert!((r - gap).abs() < 1e-12);
    unsafe {
        plrnn_converted_free(c);
        plrnn_model_free(m);
    }
}

#[test]
fn converted_json_round_trips() {
    let m = load(TWO_UNIT);
    let mut c = ptr::null_mut();
    let mut text = ptr::null_mut();
    let mut again = ptr::null_mut();
    let mut text2 = ptr::null_mut();
    unsafe {
        assert_eq!(plrnn_convert(m, &mut c), PlrnnStatus::Ok);
        assert_eq!(plrnn_converted_to_json(c, false, &mut text), PlrnnStatus::Ok);
        assert_eq!(plrnn_converted_from_json(text, &mut again), PlrnnStatus::Ok);
        assert_eq!(plrnn_converted_to_json(again, false, &mut text2), PlrnnStatus::Ok);
        assert_eq!(CStr::from_ptr(text), CStr::from_ptr(text2));
        plrnn_string_free(text);
        plrnn_string_free(text2);
        plrnn_converted_free(again);
        plrnn_converted_free(c);
        plrnn_model_free(m);
    }
}

#[test]
fn model_built_from_arrays_matches_json() {
    let a = [0.5, 0.6];
    let w = [0.1, -0.2, 0.3, 0.2];
    let h = [0.1, -0.4];
    let mut built = ptr::null_mut();
    let mut s1 = ptr::null_mut();
    let mut s2 = ptr::null_mut();
    let parsed = load(TWO_UNIT);
    unsafe {
        let st = plrnn_model_new(2, a.as_ptr(), w.as_ptr(), h.as_ptr(), 1.0, 0, ptr::null(), &mut built);
        assert_eq!(st, PlrnnStatus::Ok);
        assert_eq!(plrnn_model_to_json(built, &mut s1), PlrnnStatus::Ok);
        assert_eq!(plrnn_model_to_json(parsed, &mut s2), PlrnnStatus::Ok);
        assert_eq!(CStr::from_ptr(s1), CStr::from_ptr(s2));
        plrnn_string_free(s1);
        plrnn_string_free(s2);
        plrnn_model_free(built);
        plrnn_model_free(parsed);
    }
}

#[test]
fn partial_conversion_reports_failed_regions() {
    let m = load(SINGULAR);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { plrnn_convert(m, &mut c) }, PlrnnStatus::Partial);
    assert!(!c.is_null());
    assert_eq!(unsafe { plrnn_converted_failed_count(c) }, 2);
    assert!(last_error().contains("1,3"), "{}", last_error());
    unsafe {
        plrnn_converted_free(c);
        plrnn_model_free(m);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let bad = CString::new(r#"{"dim":1,"a_diag":[0.5],"w":[[0.1]],"h":[0.0]}"#).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { plrnn_model_from_json(bad.as_ptr(), &mut m) }, PlrnnStatus::Parse);
    assert!(m.is_null());
    assert!(last_error().contains("dt"));

    assert_eq!(unsafe { plrnn_model_from_json(ptr::null(), &mut m) }, PlrnnStatus::NullPointer);

    let m = load(TWO_UNIT);
    let z0 = [0.0, 0.0];
    let mut small = [0.0; 3];
    unsafe {
        assert_eq!(
            plrnn_simulate_discrete(m, z0.as_ptr(), 2, 5, small.as_mut_ptr(), small.len()),
            PlrnnStatus::BufferTooSmall
        );
        assert_eq!(
            plrnn_simulate_discrete(m, z0.as_ptr(), 3, 1, small.as_mut_ptr(), small.len()),
            PlrnnStatus::InvalidArgument
        );
        assert_eq!(
            plrnn_simulate_discrete(m, z0.as_ptr(), 2, 0, small.as_mut_ptr(), small.len()),
            PlrnnStatus::Simulation
        );
        plrnn_model_free(m);
    }
    assert_eq!(unsafe { plrnn_model_dim(ptr::null()) }, 0);
    unsafe {
        plrnn_model_free(ptr::null_mut());
        plrnn_converted_free(ptr::null_mut());
        plrnn_string_free(ptr::null_mut());
    }
}

#[test]
fn real_log_verdicts() {
    let mut v = PlrnnRealLog::Yes;
    // -I has a real logarithm (paired blocks); diag(-1, 2) does not.
    let paired = [-1.0, 0.0, 0.0, -1.0];
    let unpaired = [-1.0, 0.0, 0.0, 2.0];
    let singular = [0.0, 1.0, 0.0, 0.0];
    unsafe {
        assert_eq!(plrnn_real_log_exists(paired.as_ptr(), 2, &mut v), PlrnnStatus::Ok);
        assert_eq!(v, PlrnnRealLog::Yes);
        assert_eq!(plrnn_real_log_exists(unpaired.as_ptr(), 2, &mut v), PlrnnStatus::Ok);
        assert_eq!(v, PlrnnRealLog::No);
        assert_eq!(plrnn_real_log_exists(singular.as_ptr(), 2, &mut v), PlrnnStatus::Ok);
        assert_eq!(v, PlrnnRealLog::Singular);
        assert_eq!(plrnn_real_log_exists(paired.as_ptr(), 0, &mut v), PlrnnStatus::InvalidArgument);
    }
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(plrnn_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/plrnn_ct.h");
    assert!(header.exists());
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(out) = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .output()
        else {
            eprintln!("{compiler} not available, skipping");
            continue;
        };
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
