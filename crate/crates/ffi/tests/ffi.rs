//! Drives the C ABI exactly as a foreign caller would: through the
//! exported symbols, raw pointers, and status codes.

use std::ffi::{c_char, CStr, CString};

use impulse_solve_ffi::*;

const MODEL_JSON: &str = r#"{
    "delta": 0.1, "Lambda": 0.25, "lambda": 0.2, "c": 0.35, "d": 0.3,
    "xi": 1.0, "G": 0.0,
    "source": {"kind": "linear", "S0": 0.0},
    "levy": {"kind": "uniform"},
    "z_lo": 0.0, "z_hi": 1.0
}"#;

fn params() -> *mut IsParams {
    let json = CString::new(MODEL_JSON).unwrap();
    let mut handle: *mut IsParams = std::ptr::null_mut();
    let status = unsafe { is_params_from_json(json.as_ptr(), &mut handle) };
    assert_eq!(status, IsStatus::IsOk);
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe {
        is_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(is_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn params_parse_and_reject() {
    let p = params();
    unsafe { is_params_free(p) };

    let bad = CString::new("{\"delta\": -1}").unwrap();
    let mut handle: *mut IsParams = std::ptr::null_mut();
    let status = unsafe { is_params_from_json(bad.as_ptr(), &mut handle) };
    assert_eq!(status, IsStatus::IsParseError);
    assert!(handle.is_null());
    assert!(!last_error().is_empty());

    let status = unsafe { is_params_from_json(std::ptr::null(), &mut handle) };
    assert_eq!(status, IsStatus::IsNullPointer);
}

#[test]
fn exact1d_through_the_abi() {
    let p = params();
    let mut sol: *mut IsExact1dSolution = std::ptr::null_mut();
    assert_eq!(unsafe { is_exact1d_solve(p, &mut sol) }, IsStatus::IsOk);

    let mut summary = IsExact1dSummary {
        x_bar: 0.0,
        phi0: 0.0,
        phi_plus0: 0.0,
        phi1: 0.0,
        q: 0.0,
        r: 0.0,
    };
    assert_eq!(unsafe { is_exact1d_summary(sol, &mut summary) }, IsStatus::IsOk);
    assert!((summary.x_bar - 0.7986).abs() < 5e-4);
    assert!((summary.phi0 - 4.253).abs() < 1e-3);
    assert!((summary.q - 0.138).abs() < 1e-3);
    assert!((summary.r - 0.494).abs() < 1e-3);

    let v0 = unsafe { is_exact1d_value(sol, 0.0) };
    assert_eq!(v0, summary.phi0);
    let v1 = unsafe { is_exact1d_value(sol, 1.0) };
    assert!((v1 - summary.phi1).abs() < 1e-12);
    let d = unsafe { is_exact1d_density(sol, 0.9) };
    assert!(d > 0.0);
    assert!(unsafe { is_exact1d_value(std::ptr::null(), 0.5) }.is_nan());

    unsafe {
        is_exact1d_solution_free(sol);
        is_params_free(p);
    }
}

#[test]
fn no_bracket_surfaces_as_its_own_code() {
    let json = CString::new(MODEL_JSON.replace("0.35", "40.0").replace("\"d\": 0.3", "\"d\": 40.0"))
        .unwrap();
    let mut p: *mut IsParams = std::ptr::null_mut();
    assert_eq!(unsafe { is_params_from_json(json.as_ptr(), &mut p) }, IsStatus::IsOk);
    let mut sol: *mut IsExact1dSolution = std::ptr::null_mut();
    assert_eq!(unsafe { is_exact1d_solve(p, &mut sol) }, IsStatus::IsNoBracket);
    assert!(last_error().contains("sign change"));
    unsafe { is_params_free(p) };
}

#[test]
fn hjb_solve_and_accessors() {
    let p = params();
    let mut field: *mut IsValueField = std::ptr::null_mut();
    let status = unsafe { is_hjb_solve(p, 25, 50, -1.0, 1e-12, 200_000, 0, &mut field) };
    assert_eq!(status, IsStatus::IsOk, "error: {}", last_error());

    assert_eq!(unsafe { is_value_field_n(field) }, 25);
    assert_eq!(unsafe { is_value_field_rows(field) }, 1);
    assert!(unsafe { is_value_field_iterations(field) } > 100);
    let phi0 = unsafe { is_value_field_phi(field, 0, 0) };
    assert!((phi0 - 4.25).abs() < 0.1);
    let eta0 = unsafe { is_value_field_eta(field, 0, 0) };
    assert_eq!(eta0, 1.0);
    let x_bar = unsafe { is_value_field_threshold(field, 0) };
    assert!((x_bar - 0.7986).abs() < 0.05);
    assert!(unsafe { is_value_field_phi(field, 26, 0) }.is_nan());

    unsafe {
        is_value_field_free(field);
        is_params_free(p);
    }
}

#[test]
fn fp_solve_conserves_mass_through_the_abi() {
    let p = params();
    let thresholds = [0.7986f64];
    let mut field: *mut IsDensityField = std::ptr::null_mut();
    let status = unsafe {
        is_fp_solve(p, 25, 50, -1.0, 1e-10, 2_000_000, 0, thresholds.as_ptr(), 1, &mut field)
    };
    assert_eq!(status, IsStatus::IsOk, "error: {}", last_error());

    assert_eq!(unsafe { is_density_field_n(field) }, 25);
    assert_eq!(unsafe { is_density_field_rows(field) }, 1);
    let mass = unsafe { is_density_field_mass(field) };
    assert!((mass - 1.0).abs() < 1e-10);
    let q = unsafe { is_density_field_q(field, 0) };
    let r = unsafe { is_density_field_r(field, 0) };
    assert!((q - 0.138).abs() < 0.05);
    assert!((r - 0.494).abs() < 0.05);
    assert!(unsafe { is_density_field_steps(field) } > 0);
    assert!(unsafe { is_density_field_p(field, 25, 0) }.is_nan());

    // bad threshold count is rejected, not UB
    let mut field2: *mut IsDensityField = std::ptr::null_mut();
    let status = unsafe {
        is_fp_solve(p, 25, 50, -1.0, 1e-10, 1_000, 0, thresholds.as_ptr(), 7, &mut field2)
    };
    assert_eq!(status, IsStatus::IsInvalidArgument);

    unsafe {
        is_density_field_free(field);
        is_params_free(p);
    }
}

#[test]
fn mc_objective_through_the_abi() {
    let p = params();
    let (mut mean, mut std_err) = (0.0f64, 0.0f64);
    let status = unsafe {
        is_mc_objective(p, 0.7986, 1.0, 0.0, 2_000, 0.02, 80.0, 9, &mut mean, &mut std_err)
    };
    assert_eq!(status, IsStatus::IsOk);
    assert!(mean > 0.5 && mean < 3.0, "mean {mean}");
    assert!(std_err > 0.0);
    unsafe { is_params_free(p) };
}

#[test]
fn generated_header_exists_with_the_exported_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("impulse_solve.h");
    let text = std::fs::read_to_string(&header).expect("header should be generated at build time");
    for symbol in [
        "IsStatus",
        "is_params_from_json",
        "is_exact1d_solve",
        "is_hjb_solve",
        "is_fp_solve",
        "is_mc_objective",
        "is_last_error_message",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }
    // opaque handles stay opaque
    assert!(text.contains("typedef struct IsParams IsParams;"));
}

// Compiles and runs a small C program against the generated header and the
// static library, proving the surface is consumable without Rust.
#[test]
fn c_program_links_and_runs() {
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    // the staticlib is a lib-target artifact, not part of the test build
    let build = std::process::Command::new(env!("CARGO"))
        .args(["build", "-p", "impulse-solve-ffi"])
        .current_dir(manifest)
        .output()
        .expect("cargo should run");
    assert!(build.status.success(), "cargo build: {}", String::from_utf8_lossy(&build.stderr));
    let libdir = manifest.join("../../target/debug");
    let staticlib = libdir.join("libimpulse_solve_ffi.a");
    assert!(staticlib.exists(), "static library missing at {}", staticlib.display());

    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("probe.c");
    std::fs::write(
        &source,
        r#"
#include <stdio.h>
#include "impulse_solve.h"

static const char *MODEL =
    "{\"delta\": 0.1, \"Lambda\": 0.25, \"lambda\": 0.2, \"c\": 0.35,"
    " \"d\": 0.3, \"xi\": 1.0, \"G\": 0.0,"
    " \"source\": {\"kind\": \"linear\", \"S0\": 0.0},"
    " \"levy\": {\"kind\": \"uniform\"}, \"z_lo\": 0.0, \"z_hi\": 1.0}";

int main(void) {
    IsParams *params = NULL;
    if (is_params_from_json(MODEL, &params) != IsOk) return 1;
    IsExact1dSolution *sol = NULL;
    if (is_exact1d_solve(params, &sol) != IsOk) return 2;
    IsExact1dSummary summary;
    if (is_exact1d_summary(sol, &summary) != IsOk) return 3;
    printf("x_bar=%.4f phi0=%.3f q=%.3f r=%.3f\n",
           summary.x_bar, summary.phi0, summary.q, summary.r);
    is_exact1d_solution_free(sol);
    is_params_free(params);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("probe");
    let cc = std::process::Command::new("cc")
        .arg(&source)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&libdir)
        .arg("-limpulse_solve_ffi")
        .arg("-lpthread")
        .arg("-ldl")
        .arg("-lm")
        .arg("-o")
        .arg(&exe)
        .output()
        .expect("cc should be available");
    assert!(cc.status.success(), "cc failed: {}", String::from_utf8_lossy(&cc.stderr));

    let run = std::process::Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "probe exited with {:?}", run.status.code());
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("x_bar=0.7986"), "stdout: {stdout}");
    assert!(stdout.contains("phi0=4.253"), "stdout: {stdout}");
}
