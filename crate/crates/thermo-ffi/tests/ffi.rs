use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use thermo_ffi::*;

fn model(spec: &str) -> *mut ThermoModel {
    let s = CString::new(spec).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { thermo_model_new(s.as_ptr(), &mut m) }, ThermoStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(thermo_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn bad_spec_reports_invalid_input() {
    let s = CString::new("normal-mean:D=0").unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { thermo_model_new(s.as_ptr(), &mut m) };
    assert_eq!(st, ThermoStatus::InvalidInput);
    assert!(m.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_pointers_are_rejected() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { thermo_model_new(ptr::null(), &mut m) }, ThermoStatus::NullPointer);
    let mut q = ThermoQuantities::default();
    let st = unsafe { thermo_disorder_average(ptr::null(), ThermoPrior::Natural, 5.0, 10, 1, &mut q) };
    assert_eq!(st, ThermoStatus::NullPointer);
    unsafe { thermo_model_free(ptr::null_mut()) };
}

#[test]
fn spec_round_trip_and_truncation() {
    let m = model("exponential:lambda0=2");
    let mut need = 0usize;
    assert_eq!(unsafe { thermo_model_spec(m, ptr::null_mut(), 0, &mut need) }, ThermoStatus::Ok);
    let mut buf = vec![0 as std::ffi::c_char; need];
    assert_eq!(unsafe { thermo_model_spec(m, buf.as_mut_ptr(), need, ptr::null_mut()) }, ThermoStatus::Ok);
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
    assert!(s.starts_with("exponential"), "{s}");
    let mut small = [1 as std::ffi::c_char; 4];
    unsafe { thermo_model_spec(m, small.as_mut_ptr(), 4, ptr::null_mut()) };
    assert_eq!(small[3], 0);
    unsafe { thermo_model_free(m) };
}

#[test]
fn divergent_gpi_is_reported_not_failed() {
    let m = model("normal-meanvar:D=1");
    let (mut lc, mut k) = (0.0, 0.0);
    assert_eq!(unsafe { thermo_gpi_closed_form(m, 1.0, &mut lc, &mut k) }, ThermoStatus::Ok);
    assert_eq!(k, f64::INFINITY);
    assert_eq!(unsafe { thermo_gpi_closed_form(m, 50.0, &mut lc, &mut k) }, ThermoStatus::Ok);
    assert!(k.is_finite() && k > 2.0);
    unsafe { thermo_model_free(m) };
}

#[test]
fn disorder_average_is_seeded() {
    let m = model("normal-mean:D=1,sigma=1,mu0=0");
    let run = || {
        let mut q = ThermoQuantities::default();
        assert_eq!(unsafe { thermo_disorder_average(m, ThermoPrior::Gpi, 10.0, 200, 7, &mut q) }, ThermoStatus::Ok);
        q
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    // one regular parameter: learning capacity near 1/2
    assert!((a.cbar - 0.5).abs() < 5.0 * a.cse + 0.05, "{a:?}");
    unsafe { thermo_model_free(m) };
}

#[test]
fn evidence_matches_exponential_closed_form() {
    // flat prior on the rate: Z = Γ(N+1) / (Σx)^(N+1)
    let m = model("exponential:lambda0=1");
    let x = [0.3, 1.2, 0.7, 2.1];
    let mut lz = 0.0;
    assert_eq!(unsafe { thermo_log_evidence(m, ThermoPrior::Flat, x.as_ptr(), x.len(), &mut lz) }, ThermoStatus::Ok);
    let s: f64 = x.iter().sum();
    let expect = (24.0f64).ln() - 5.0 * s.ln();
    assert!((lz - expect).abs() < 1e-6, "{lz} vs {expect}");
    unsafe { thermo_model_free(m) };
}

/// Compiles the C smoke program against the generated header and the static
/// library when a C compiler and the library are present.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let target = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).parent().unwrap().to_path_buf();
    let lib = ["debug", "release"].iter().map(|p| target.join(p).join("libthermo_ffi.a")).find(|p| p.exists());
    let Some(lib) = lib else {
        eprintln!("static library not built; skipping");
        return;
    };
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c_smoke");
    let cc = Command::new("cc")
        .arg(manifest.join("tests/c_smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status();
    match cc {
        Ok(s) => assert!(s.success(), "C compile failed"),
        Err(_) => {
            eprintln!("no C compiler; skipping");
            return;
        }
    }
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
