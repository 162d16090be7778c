//! C ABI for genlip.
//!
//! Objects cross the boundary as opaque handles created by a `*_new` / `*_run`
//! function and released by the matching `*_free`. Every fallible function
//! returns a [`GenlipStatus`]; on failure a message is kept per thread and can
//! be copied out with [`genlip_last_error_message`]. Panics never unwind into
//! the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use genlip::framework::RunRecord;
use genlip::harness::{run_cell, Cell, ExperimentConfig, MethodSpec};
use genlip::problems::{parse_problem, Problem};
use genlip::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenlipStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidParameter = 3,
    /// A parameter-regime inequality of a construction fails.
    Regime = 4,
    Diverged = 5,
    Config = 6,
    Io = 7,
    Numeric = 8,
    OutOfRange = 9,
    Panic = 10,
}

/// Problem constants as declared by the suite.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GenlipConstants {
    pub radius: f64,
    pub m0: f64,
    pub m1: f64,
    pub g0: f64,
    pub g1: f64,
    pub f_star: f64,
    /// Largest optimality gap over the feasible ball.
    pub max_gap: f64,
}

/// One trace row. Quantities that do not apply are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GenlipTraceRow {
    pub k: u64,
    pub f_gap: f64,
    pub f_gap_avg_iterate: f64,
    pub step_norm: f64,
    pub effective_stepsize: f64,
    pub regret_running: f64,
    pub wall_ns: u64,
}

/// Opaque problem handle.
pub struct GenlipProblem {
    inner: Problem,
}

/// Opaque handle to a finished run.
pub struct GenlipRun {
    inner: RunRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> GenlipStatus {
    match e {
        Error::InvalidParameter(_) | Error::Dimension { .. } => GenlipStatus::InvalidParameter,
        Error::Regime(_) => GenlipStatus::Regime,
        Error::Diverged { .. } => GenlipStatus::Diverged,
        Error::Config { .. } => GenlipStatus::Config,
        Error::Io(_) => GenlipStatus::Io,
        Error::NonFinite(_) | Error::Asymmetric(_) | Error::Indefinite(_) | Error::NoConvergence(_) => {
            GenlipStatus::Numeric
        }
    }
}

/// Run `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (GenlipStatus, String)>) -> GenlipStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GenlipStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GenlipStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (GenlipStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (GenlipStatus, String) {
    (GenlipStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (GenlipStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| (GenlipStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, not
/// counting the terminator, so a caller can size a second attempt.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn genlip_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn genlip_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a suite problem from its id, e.g. `exp_inf{d=2,R=1}` or
/// `lower:sgd_I{R=1,G0=1,G1=8,eps=0.1}`.
///
/// # Safety
/// `spec` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn genlip_problem_new(spec: *const c_char, out: *mut *mut GenlipProblem) -> GenlipStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let spec = read_str(spec, "spec")?;
        let p = parse_problem(spec).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(GenlipProblem { inner: p }));
        Ok(())
    })
}

/// Release a problem. Null is ignored.
///
/// # Safety
/// `p` must be null or a handle from [`genlip_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn genlip_problem_free(p: *mut GenlipProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Dimension of the problem, 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn genlip_problem_dim(p: *const GenlipProblem) -> usize {
    p.as_ref().map_or(0, |p| p.inner.dim())
}

/// # Safety
/// `p` must be a live problem handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn genlip_problem_constants(p: *const GenlipProblem, out: *mut GenlipConstants) -> GenlipStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = p.inner.constants();
        *out = GenlipConstants {
            radius: c.radius,
            m0: c.m0,
            m1: c.m1,
            g0: c.g0,
            g1: c.g1,
            f_star: c.f_star,
            max_gap: c.max_gap,
        };
        Ok(())
    })
}

/// # Safety
/// `x` must point to `n` readable doubles.
unsafe fn read_point<'a>(p: &GenlipProblem, x: *const f64, n: usize) -> Result<&'a [f64], (GenlipStatus, String)> {
    if x.is_null() {
        return Err(null("x"));
    }
    if n != p.inner.dim() {
        return Err((
            GenlipStatus::InvalidParameter,
            format!("point has length {n}, problem dimension is {}", p.inner.dim()),
        ));
    }
    Ok(std::slice::from_raw_parts(x, n))
}

/// `f(x)`.
///
/// # Safety
/// `p` must be a live handle, `x` must point to `n` doubles and `out` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn genlip_problem_value(
    p: *const GenlipProblem,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> GenlipStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = p.inner.value(read_point(p, x, n)?);
        Ok(())
    })
}

/// A subgradient at `x`, written to `grad` (length `n`).
///
/// # Safety
/// `p` must be a live handle; `x` and `grad` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn genlip_problem_subgrad(
    p: *const GenlipProblem,
    x: *const f64,
    n: usize,
    grad: *mut f64,
) -> GenlipStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if grad.is_null() {
            return Err(null("grad"));
        }
        let g = p.inner.subgrad(read_point(p, x, n)?);
        std::slice::from_raw_parts_mut(grad, n).copy_from_slice(&g);
        Ok(())
    })
}

/// Run one method on a problem.
///
/// `method` is a method id such as `adamw_exp`, `adamw_exp:two_stage`,
/// `framework:solo_scalar:avg` or `quasar:solo_scalar`. `options` is null or
/// `key = value` lines in the experiment config format (`eps`, `noise`, `k`,
/// `eta`, `c_hat`, `trace`, ...); `problem`, `methods` and `seeds` keys are
/// ignored in favour of the arguments.
///
/// # Safety
/// `p` must be a live handle, `method` a NUL-terminated string, `options`
/// null or NUL-terminated, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn genlip_run(
    p: *const GenlipProblem,
    method: *const c_char,
    options: *const c_char,
    seed: u64,
    out: *mut *mut GenlipRun,
) -> GenlipStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        let method = MethodSpec::parse(read_str(method, "method")?).map_err(lib_err)?;
        let cfg = if options.is_null() {
            ExperimentConfig::default()
        } else {
            ExperimentConfig::parse(read_str(options, "options")?).map_err(lib_err)?
        };
        let cell = Cell { run_id: 0, method, seed };
        let rec = run_cell(&cfg, &p.inner, &cell).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(GenlipRun { inner: rec }));
        Ok(())
    })
}

/// Release a run. Null is ignored.
///
/// # Safety
/// `r` must be null or a handle from [`genlip_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn genlip_run_free(r: *mut GenlipRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Iterations performed, 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn genlip_run_steps(r: *const GenlipRun) -> u64 {
    r.as_ref().map_or(0, |r| r.inner.steps)
}

/// Gap at the last iterate, NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn genlip_run_final_gap(r: *const GenlipRun) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.inner.final_gap)
}

/// First iteration whose reported gap reached the target, or -1.
///
/// # Safety
/// `r` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn genlip_run_first_hit(r: *const GenlipRun) -> i64 {
    r.as_ref().and_then(|r| r.inner.first_hit).map_or(-1, |k| k as i64)
}

/// A derived parameter such as `K`, `T` or `eta`.
///
/// # Safety
/// `r` must be a live run handle, `name` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn genlip_run_param(r: *const GenlipRun, name: *const c_char, out: *mut f64) -> GenlipStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let name = read_str(name, "name")?;
        *out =
            r.inner.param(name).ok_or_else(|| (GenlipStatus::OutOfRange, format!("run has no parameter `{name}`")))?;
        Ok(())
    })
}

/// Number of trace rows, 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn genlip_run_row_count(r: *const GenlipRun) -> usize {
    r.as_ref().map_or(0, |r| r.inner.rows.len())
}

/// # Safety
/// `r` must be a live run handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn genlip_run_row(r: *const GenlipRun, i: usize, out: *mut GenlipTraceRow) -> GenlipStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let row =
            r.inner.rows.get(i).ok_or_else(|| {
                (GenlipStatus::OutOfRange, format!("row {i} out of range ({} rows)", r.inner.rows.len()))
            })?;
        *out = GenlipTraceRow {
            k: row.k,
            f_gap: row.f_gap,
            f_gap_avg_iterate: row.f_gap_avg_iterate,
            step_norm: row.step_norm,
            effective_stepsize: row.effective_stepsize,
            regret_running: row.regret_running,
            wall_ns: row.wall_ns,
        };
        Ok(())
    })
}

/// Copy the final iterate into `x` (length `n`, which must equal the
/// problem dimension).
///
/// # Safety
/// `r` must be a live run handle and `x` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn genlip_run_final_x(r: *const GenlipRun, x: *mut f64, n: usize) -> GenlipStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("run"))?;
        if x.is_null() {
            return Err(null("x"));
        }
        let v = &r.inner.final_x;
        if n != v.len() {
            return Err((GenlipStatus::InvalidParameter, format!("buffer has length {n}, iterate has {}", v.len())));
        }
        std::slice::from_raw_parts_mut(x, n).copy_from_slice(v);
        Ok(())
    })
}
