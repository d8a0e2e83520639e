//! C interface to the satlink simulator.
//!
//! Objects are opaque handles created by `*_new`/`*_parse`/`satlink_run`
//! and released with the matching `*_free`. Every fallible call returns a
//! [`SatlinkStatus`]; on failure [`satlink_last_error`] describes the
//! problem until the next failing call on the same thread. Panics never
//! cross the boundary; they surface as `SATLINK_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use satlink::metrics::{self, session_stats};
use satlink::phy::{estimate_plr_curve, plr_lookup, PlrCurve};
use satlink::{AccessMethod, Error, RunResult, Scenario, SimTime};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatlinkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The scenario or PLR table failed validation.
    InvalidConfig = 3,
    Io = 4,
    /// The requested value does not exist, e.g. a flow that never received
    /// `n` datagrams.
    NotFound = 5,
    Internal = 6,
}

/// A simulation scenario.
pub struct SatlinkScenario(Scenario);

/// The outcome of one run.
pub struct SatlinkResult(RunResult);

/// A packet loss ratio curve.
pub struct SatlinkCurve(PlrCurve);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SatlinkSessionStats {
    pub min: u64,
    pub median: u64,
    pub max: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SatlinkStatus, msg: impl Into<String>) -> SatlinkStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> SatlinkStatus {
    let status = match &e {
        Error::Io { .. } => SatlinkStatus::Io,
        Error::InvalidConfig(_)
        | Error::Scenario { .. }
        | Error::Configuration(_)
        | Error::InvalidCurve(_)
        | Error::UnsupportedMethod(_) => SatlinkStatus::InvalidConfig,
        _ => SatlinkStatus::Internal,
    };
    fail(status, e.to_string())
}

fn guard<F: FnOnce() -> SatlinkStatus>(f: F) -> SatlinkStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(SatlinkStatus::Internal, "panic inside satlink"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SatlinkStatus> {
    if p.is_null() {
        return Err(fail(SatlinkStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SatlinkStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

macro_rules! deref {
    ($p:expr, $what:literal) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(SatlinkStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr, $what:literal) => {
        match $p.as_mut() {
            Some(v) => v,
            None => return fail(SatlinkStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! out {
    ($p:expr, $v:expr) => {{
        if $p.is_null() {
            return fail(SatlinkStatus::NullPointer, "output pointer is null");
        }
        *$p = $v;
        SatlinkStatus::Ok
    }};
}

/// The message of the last failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn satlink_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn satlink_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default scenario with `sessions` flows on `access` (`dedicated`,
/// `crdsa3` or `musca3`).
///
/// # Safety
/// `access` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_scenario_new(
    access: *const c_char,
    sessions: u32,
    out: *mut *mut SatlinkScenario,
) -> SatlinkStatus {
    guard(|| {
        let access = match str_arg(access, "access") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let method: AccessMethod = match access.parse() {
            Ok(m) => m,
            Err(e) => return from_error(e),
        };
        let sc = Box::new(SatlinkScenario(Scenario::new(method, sessions)));
        out!(out, Box::into_raw(sc))
    })
}

/// Parses scenario text in `key = value` form. A relative `plr_table` is
/// resolved against the current directory.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_scenario_parse(text: *const c_char, out: *mut *mut SatlinkScenario) -> SatlinkStatus {
    guard(|| {
        let text = match str_arg(text, "text") {
            Ok(s) => s,
            Err(st) => return st,
        };
        match Scenario::parse(text, Path::new("./<ffi>")) {
            Ok(sc) => out!(out, Box::into_raw(Box::new(SatlinkScenario(sc)))),
            Err(e) => from_error(e),
        }
    })
}

/// Reads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_scenario_from_file(path: *const c_char, out: *mut *mut SatlinkScenario) -> SatlinkStatus {
    guard(|| {
        let path = match str_arg(path, "path") {
            Ok(s) => s,
            Err(st) => return st,
        };
        match Scenario::from_path(Path::new(path)) {
            Ok(sc) => out!(out, Box::into_raw(Box::new(SatlinkScenario(sc)))),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `scenario` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn satlink_scenario_set_seed(scenario: *mut SatlinkScenario, seed: u64) -> SatlinkStatus {
    let sc = deref_mut!(scenario, "scenario");
    sc.0.seed = seed;
    SatlinkStatus::Ok
}

/// # Safety
/// `scenario` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn satlink_scenario_set_duration_ms(scenario: *mut SatlinkScenario, ms: u64) -> SatlinkStatus {
    let sc = deref_mut!(scenario, "scenario");
    if ms == 0 {
        return fail(SatlinkStatus::InvalidArgument, "duration must be positive");
    }
    sc.0.duration = SimTime::from_millis(ms);
    SatlinkStatus::Ok
}

/// Checks the scenario; on failure the last error lists every violation.
///
/// # Safety
/// `scenario` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn satlink_scenario_validate(scenario: *const SatlinkScenario) -> SatlinkStatus {
    let sc = deref!(scenario, "scenario");
    guard(|| match sc.0.validate() {
        Ok(()) => SatlinkStatus::Ok,
        Err(e) => from_error(e),
    })
}

/// The scenario in file syntax; release with [`satlink_string_free`].
///
/// # Safety
/// `scenario` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_scenario_to_text(scenario: *const SatlinkScenario, out: *mut *mut c_char) -> SatlinkStatus {
    let sc = deref!(scenario, "scenario");
    let text = CString::new(sc.0.to_text()).unwrap_or_default();
    out!(out, text.into_raw())
}

/// # Safety
/// `scenario` must come from this library or be NULL, and is invalid after
/// the call.
#[no_mangle]
pub unsafe extern "C" fn satlink_scenario_free(scenario: *mut SatlinkScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn satlink_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs the scenario to completion.
///
/// # Safety
/// `scenario` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_run(scenario: *const SatlinkScenario, out: *mut *mut SatlinkResult) -> SatlinkStatus {
    let sc = deref!(scenario, "scenario");
    guard(|| match satlink::run_scenario(&sc.0) {
        Ok(r) => out!(out, Box::into_raw(Box::new(SatlinkResult(r)))),
        Err(e) => from_error(e),
    })
}

/// # Safety
/// `result` must come from this library or be NULL, and is invalid after
/// the call.
#[no_mangle]
pub unsafe extern "C" fn satlink_result_free(result: *mut SatlinkResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_result_num_flows(result: *const SatlinkResult, out: *mut u32) -> SatlinkStatus {
    let r = deref!(result, "result");
    out!(out, r.0.delivered.len() as u32)
}

/// Distinct datagrams received for `flow`.
///
/// # Safety
/// `result` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_result_delivered(result: *const SatlinkResult, flow: u32, out: *mut u64) -> SatlinkStatus {
    let r = deref!(result, "result");
    match r.0.delivered.get(flow as usize) {
        Some(&n) => out!(out, n),
        None => fail(SatlinkStatus::InvalidArgument, format!("no flow {flow}")),
    }
}

/// Aggregate goodput in bit/s.
///
/// # Safety
/// `result` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_result_throughput_bps(result: *const SatlinkResult, out: *mut f64) -> SatlinkStatus {
    let r = deref!(result, "result");
    out!(out, metrics::throughput(&r.0))
}

/// Datagrams dropped at the gateway over all datagrams that reached it.
///
/// # Safety
/// `result` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_result_loss_ratio(result: *const SatlinkResult, out: *mut f64) -> SatlinkStatus {
    let r = deref!(result, "result");
    out!(out, r.0.loss_ratio())
}

/// Min, median and max delivered datagrams per session.
///
/// # Safety
/// `result` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_result_session_stats(
    result: *const SatlinkResult,
    out: *mut SatlinkSessionStats,
) -> SatlinkStatus {
    let r = deref!(result, "result");
    let s = session_stats(&r.0);
    out!(
        out,
        SatlinkSessionStats {
            min: s.min,
            median: s.median,
            max: s.max,
        }
    )
}

/// Seconds until `flow` had received `n` datagrams in order;
/// `SATLINK_STATUS_NOT_FOUND` if it never did.
///
/// # Safety
/// `result` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_result_time_to_n(
    result: *const SatlinkResult,
    flow: u32,
    n: u64,
    out: *mut f64,
) -> SatlinkStatus {
    let r = deref!(result, "result");
    let Some(times) = r.0.in_order_times.get(flow as usize) else {
        return fail(SatlinkStatus::InvalidArgument, format!("no flow {flow}"));
    };
    match metrics::time_to_n_datagrams(times, n as usize) {
        Some(t) => out!(out, t.as_secs_f64()),
        None => fail(SatlinkStatus::NotFound, format!("flow {flow} received fewer than {n} datagrams")),
    }
}

/// Writes the reception trace as CSV (`time_s,flow_id,seq_no`).
///
/// # Safety
/// `result` must come from this library; `path` must be a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn satlink_result_write_trace(result: *const SatlinkResult, path: *const c_char) -> SatlinkStatus {
    let r = deref!(result, "result");
    let path = match str_arg(path, "path") {
        Ok(s) => s,
        Err(st) => return st,
    };
    guard(|| match metrics::write_file(Path::new(path), |w| metrics::write_trace(&r.0.trace, w)) {
        Ok(()) => SatlinkStatus::Ok,
        Err(e) => from_error(e),
    })
}

/// Monte Carlo PLR curve of `method` over `len` loads (packets per block).
///
/// # Safety
/// `method` must be a NUL-terminated string, `loads` must point to `len`
/// values, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_curve_estimate(
    method: *const c_char,
    loads: *const u32,
    len: usize,
    trials: u64,
    seed: u64,
    out: *mut *mut SatlinkCurve,
) -> SatlinkStatus {
    let method = match str_arg(method, "method") {
        Ok(s) => s,
        Err(st) => return st,
    };
    if loads.is_null() {
        return fail(SatlinkStatus::NullPointer, "loads is null");
    }
    if len == 0 {
        return fail(SatlinkStatus::InvalidArgument, "no loads given");
    }
    let loads = std::slice::from_raw_parts(loads, len);
    guard(|| {
        let method: AccessMethod = match method.parse() {
            Ok(m) => m,
            Err(e) => return from_error(e),
        };
        match estimate_plr_curve(method, loads, trials, &satlink::Rng::new(seed)) {
            Ok(c) => out!(out, Box::into_raw(Box::new(SatlinkCurve(c)))),
            Err(e) => from_error(e),
        }
    })
}

/// Reads a `load,plr` CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_curve_from_file(path: *const c_char, out: *mut *mut SatlinkCurve) -> SatlinkStatus {
    let path = match str_arg(path, "path") {
        Ok(s) => s,
        Err(st) => return st,
    };
    guard(|| match PlrCurve::from_path(Path::new(path), None) {
        Ok(c) => out!(out, Box::into_raw(Box::new(SatlinkCurve(c)))),
        Err(e) => from_error(e),
    })
}

/// # Safety
/// `curve` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_curve_len(curve: *const SatlinkCurve, out: *mut usize) -> SatlinkStatus {
    let c = deref!(curve, "curve");
    out!(out, c.0.points().len())
}

/// The `index`-th tabulated point.
///
/// # Safety
/// `curve` must come from this library; `load` and `plr` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_curve_point(
    curve: *const SatlinkCurve,
    index: usize,
    load: *mut f64,
    plr: *mut f64,
) -> SatlinkStatus {
    let c = deref!(curve, "curve");
    if load.is_null() || plr.is_null() {
        return fail(SatlinkStatus::NullPointer, "output pointer is null");
    }
    match c.0.points().get(index) {
        Some(&(l, p)) => {
            *load = l;
            *plr = p;
            SatlinkStatus::Ok
        }
        None => fail(SatlinkStatus::InvalidArgument, format!("no point {index}")),
    }
}

/// Interpolated PLR at `load`.
///
/// # Safety
/// `curve` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn satlink_curve_lookup(curve: *const SatlinkCurve, load: f64, out: *mut f64) -> SatlinkStatus {
    let c = deref!(curve, "curve");
    if !load.is_finite() {
        return fail(SatlinkStatus::InvalidArgument, "load must be finite");
    }
    out!(out, plr_lookup(&c.0, load))
}

/// # Safety
/// `curve` must come from this library or be NULL, and is invalid after the
/// call.
#[no_mangle]
pub unsafe extern "C" fn satlink_curve_free(curve: *mut SatlinkCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}
