use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use genlip_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        genlip_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn problem(spec: &str) -> *mut GenlipProblem {
    let s = CString::new(spec).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { genlip_problem_new(s.as_ptr(), &mut p) }, GenlipStatus::Ok);
    p
}

#[test]
fn problem_round_trip() {
    let p = problem("norm_inf{d=2,xstar=0.5;0}");
    unsafe {
        assert_eq!(genlip_problem_dim(p), 2);
        let mut c = GenlipConstants::default();
        assert_eq!(genlip_problem_constants(p, &mut c), GenlipStatus::Ok);
        assert_eq!(c.m1, 0.0);
        let x = [0.0, 0.25];
        let mut v = f64::NAN;
        assert_eq!(genlip_problem_value(p, x.as_ptr(), 2, &mut v), GenlipStatus::Ok);
        assert_eq!(v, 0.5);
        let mut g = [0.0; 2];
        assert_eq!(genlip_problem_subgrad(p, x.as_ptr(), 2, g.as_mut_ptr()), GenlipStatus::Ok);
        assert_eq!(g, [-1.0, 0.0]);
        assert_eq!(genlip_problem_value(p, x.as_ptr(), 3, &mut v), GenlipStatus::InvalidParameter);
        assert!(last_error().contains("dimension"));
        genlip_problem_free(p);
    }
}

#[test]
fn errors_are_codes_not_crashes() {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(genlip_problem_new(ptr::null(), &mut p), GenlipStatus::NullPointer);
        let bad = CString::new("nope{d=1}").unwrap();
        assert_eq!(genlip_problem_new(bad.as_ptr(), &mut p), GenlipStatus::InvalidParameter);
        assert!(p.is_null());
        assert!(last_error().contains("unknown problem"));
        let regime = CString::new("lower:sgd_I{G1=4}").unwrap();
        assert_eq!(genlip_problem_new(regime.as_ptr(), &mut p), GenlipStatus::Regime);
        // null handles are tolerated by the getters and free functions
        assert_eq!(genlip_problem_dim(ptr::null()), 0);
        assert!(genlip_run_final_gap(ptr::null()).is_nan());
        genlip_problem_free(ptr::null_mut());
        genlip_run_free(ptr::null_mut());
    }
}

#[test]
fn run_and_read_back() {
    let p = problem("lower:sgd_I{R=1,G0=1,G1=8,eps=0.1}");
    let method = CString::new("adamw_exp:two_stage").unwrap();
    let opts = CString::new("eps = 0.1\ntrace = all\n").unwrap();
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(genlip_run(p, method.as_ptr(), opts.as_ptr(), 3, &mut r), GenlipStatus::Ok);
        let steps = genlip_run_steps(r);
        let mut k = 0.0;
        let name = CString::new("K").unwrap();
        assert_eq!(genlip_run_param(r, name.as_ptr(), &mut k), GenlipStatus::Ok);
        assert_eq!(k as u64, steps);
        assert_eq!(genlip_run_row_count(r), steps as usize + 1);
        let mut row = GenlipTraceRow::default();
        assert_eq!(genlip_run_row(r, steps as usize, &mut row), GenlipStatus::Ok);
        assert_eq!(row.k, steps);
        assert_eq!(row.f_gap, genlip_run_final_gap(r));
        assert_eq!(genlip_run_row(r, steps as usize + 1, &mut row), GenlipStatus::OutOfRange);
        assert!(genlip_run_first_hit(r) > 0);
        let mut x = [f64::NAN];
        assert_eq!(genlip_run_final_x(r, x.as_mut_ptr(), 1), GenlipStatus::Ok);
        assert!(x[0].abs() <= 1.0);
        genlip_run_free(r);

        let zero = CString::new("eps = 0\n").unwrap();
        assert_eq!(genlip_run(p, method.as_ptr(), zero.as_ptr(), 0, &mut r), GenlipStatus::Regime);
        assert!(r.is_null());
        let bad = CString::new("eps = 0.1\ncolour = red\n").unwrap();
        assert_eq!(genlip_run(p, method.as_ptr(), bad.as_ptr(), 0, &mut r), GenlipStatus::Config);
        genlip_problem_free(p);
    }
}

#[test]
fn error_message_reports_full_length() {
    let bad = CString::new("nope").unwrap();
    let mut p = ptr::null_mut();
    unsafe {
        genlip_problem_new(bad.as_ptr(), &mut p);
        let n = genlip_last_error_message(ptr::null_mut(), 0);
        let mut small = [0 as c_char; 4];
        assert_eq!(genlip_last_error_message(small.as_mut_ptr(), 4), n);
        assert_eq!(CStr::from_ptr(small.as_ptr()).to_bytes().len(), 3);
    }
    assert!(unsafe { CStr::from_ptr(genlip_version()) }.to_str().unwrap().starts_with("0."));
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/genlip.h")).unwrap();
    for name in [
        "genlip_problem_new",
        "genlip_problem_free",
        "genlip_run",
        "genlip_run_free",
        "genlip_run_row",
        "genlip_last_error_message",
        "typedef struct GenlipProblem GenlipProblem",
        "GENLIP_STATUS_REGIME = 4",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

/// Compile and run a small C program against the header and the static
/// library when a C compiler is around.
#[test]
fn c_program_links_against_the_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libgenlip_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or no C compiler");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "genlip.h"
int main(void) {
    GenlipProblem *p = NULL;
    if (genlip_problem_new("exp_inf{d=2,b=0.5}", &p) != GENLIP_STATUS_OK) return 2;
    GenlipRun *r = NULL;
    GenlipStatus s = genlip_run(p, "adamw_exp", "eps = 0.05\nk = 200\n", 1, &r);
    if (s != GENLIP_STATUS_OK) { char m[256]; genlip_last_error_message(m, sizeof m); puts(m); return 3; }
    printf("%llu %.17g\n", (unsigned long long)genlip_run_steps(r), genlip_run_final_gap(r));
    genlip_run_free(r);
    if (genlip_problem_new("bogus", &p) != GENLIP_STATUS_INVALID_PARAMETER) return 4;
    return 0;
}
"#,
    )
    .unwrap();
    let bin: PathBuf = dir.path().join("smoke");
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I", include])
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("200 "), "{text}");
}
