//! C ABI for the npathsim receiver simulator.
//!
//! Opaque handles wrap configuration, built receivers and sweep results;
//! every entry point returns an `NpsStatus` (or a handle plus a status out
//! parameter) and never unwinds across the boundary. Error details are kept
//! per thread and read back with `nps_last_error`.
//!
//! Handle lifecycle: anything returned by a `_new`/`_build`/`_run` function
//! is owned by the caller and released with the matching `_free`.

use npathsim::blocks::{build_receiver, Receiver};
use npathsim::config::{Config, Resolved};
use npathsim::engine::{harmonic_sweep, linear_grid, periodic_steady_state, SweepResult, Tone};
use num_complex::Complex64;
use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum NpsStatus {
    /// Success.
    NpsOk = 0,
    /// Configuration problem (bad key, bad value, unparseable text).
    NpsErrConfig = 2,
    /// Simulation failure (singular topology, synthesis failure, ...).
    NpsErrSim = 3,
    /// Invalid argument (null pointer, unknown probe, bad range).
    NpsErrArg = 4,
    /// Panic caught at the boundary; state is still consistent.
    NpsErrInternal = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn status_of(err: &npathsim::Error) -> NpsStatus {
    match err.exit_code() {
        2 => NpsStatus::NpsErrConfig,
        _ => NpsStatus::NpsErrSim,
    }
}

fn guard<T>(f: impl FnOnce() -> T, fallback: T) -> T {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(_) => {
            set_error("internal panic");
            fallback
        }
    }
}

unsafe fn cstr<'a>(p: *const c_char) -> Option<&'a str> {
    if p.is_null() {
        return None;
    }
    CStr::from_ptr(p).to_str().ok()
}

/// Opaque configuration accumulator.
pub struct NpsConfig {
    inner: Config,
}

/// Opaque built receiver (netlist + lifted model), immutable and thread-safe
/// to share for read-only analysis calls.
pub struct NpsReceiver {
    rx: Receiver,
    resolved: Resolved,
}

/// Opaque sweep result.
pub struct NpsSweep {
    result: SweepResult,
    probes: Vec<String>,
}

/// Message for the most recent failure on this thread. Borrowed; valid until
/// the next failing call from the same thread.
#[no_mangle]
pub extern "C" fn nps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn nps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates an empty configuration (all defaults).
#[no_mangle]
pub extern "C" fn nps_config_new() -> *mut NpsConfig {
    guard(
        || {
            Box::into_raw(Box::new(NpsConfig {
                inner: Config::parse("").unwrap(),
            }))
        },
        ptr::null_mut(),
    )
}

/// Parses configuration text (the key = value file format) into `cfg`,
/// replacing any keys already present.
///
/// # Safety
/// `cfg` must be a live handle from `nps_config_new`; `text` a NUL-terminated
/// UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn nps_config_load(cfg: *mut NpsConfig, text: *const c_char) -> NpsStatus {
    guard(
        || {
            let (Some(cfg), Some(text)) = (cfg.as_mut(), cstr(text)) else {
                set_error("null argument");
                return NpsStatus::NpsErrArg;
            };
            match Config::parse(text) {
                Ok(parsed) => {
                    for key in parsed.keys() {
                        let v = parsed.get(key).unwrap();
                        if let Err(e) = cfg.inner.set(&format!("{key}={v}")) {
                            set_error(&e.to_string());
                            return status_of(&e);
                        }
                    }
                    NpsStatus::NpsOk
                }
                Err(e) => {
                    set_error(&e.to_string());
                    status_of(&e)
                }
            }
        },
        NpsStatus::NpsErrInternal,
    )
}

/// Sets one configuration key.
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn nps_config_set(
    cfg: *mut NpsConfig,
    key: *const c_char,
    value: *const c_char,
) -> NpsStatus {
    guard(
        || {
            let (Some(cfg), Some(key), Some(value)) = (cfg.as_mut(), cstr(key), cstr(value)) else {
                set_error("null argument");
                return NpsStatus::NpsErrArg;
            };
            match cfg.inner.set(&format!("{key}={value}")) {
                Ok(()) => NpsStatus::NpsOk,
                Err(e) => {
                    set_error(&e.to_string());
                    status_of(&e)
                }
            }
        },
        NpsStatus::NpsErrInternal,
    )
}

/// Releases a configuration handle.
///
/// # Safety
/// `cfg` must be a handle from `nps_config_new` (or null) and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nps_config_free(cfg: *mut NpsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Builds the receiver described by `cfg` and lifts it for analysis.
/// Returns null on failure with the status in `status_out` (may be null).
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn nps_receiver_build(
    cfg: *const NpsConfig,
    status_out: *mut c_int,
) -> *mut NpsReceiver {
    let set_status = |s: NpsStatus| {
        if !status_out.is_null() {
            *status_out = s as c_int;
        }
    };
    guard(
        AssertUnwindSafe(|| {
            let Some(cfg) = cfg.as_ref() else {
                set_error("null configuration");
                set_status(NpsStatus::NpsErrArg);
                return ptr::null_mut();
            };
            let resolved = match Resolved::from_config(&cfg.inner) {
                Ok(r) => r,
                Err(e) => {
                    set_error(&e.to_string());
                    set_status(status_of(&e));
                    return ptr::null_mut();
                }
            };
            match build_receiver(&resolved.params) {
                Ok(rx) => {
                    set_status(NpsStatus::NpsOk);
                    Box::into_raw(Box::new(NpsReceiver { rx, resolved }))
                }
                Err(e) => {
                    set_error(&e.to_string());
                    set_status(status_of(&e));
                    ptr::null_mut()
                }
            }
        }),
        ptr::null_mut(),
    )
}

/// Releases a receiver handle.
///
/// # Safety
/// `rx` must come from `nps_receiver_build` (or be null) and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nps_receiver_free(rx: *mut NpsReceiver) {
    if !rx.is_null() {
        drop(Box::from_raw(rx));
    }
}

/// Number of LTI segments in one LO period of the lifted model.
///
/// # Safety
/// `rx` must be a live receiver handle.
#[no_mangle]
pub unsafe extern "C" fn nps_receiver_segments(rx: *const NpsReceiver) -> c_int {
    guard(
        AssertUnwindSafe(|| {
            rx.as_ref()
                .map_or(-1, |r| r.rx.system.segments.len() as c_int)
        }),
        -1,
    )
}

/// Effective configuration hash (reproducibility fingerprint).
///
/// # Safety
/// `rx` must be a live receiver handle.
#[no_mangle]
pub unsafe extern "C" fn nps_receiver_config_hash(rx: *const NpsReceiver) -> u64 {
    guard(
        AssertUnwindSafe(|| rx.as_ref().map_or(0, |r| r.resolved.hash())),
        0,
    )
}

/// Steady-state tone response at one probe: fills out_re/out_im\[i\] with the
/// complex amplitude at f_in + (i - kmax) * f_lo, for i in 0..=2*kmax.
///
/// # Safety
/// `rx` must be a live receiver handle, `probe` NUL-terminated, and the out
/// arrays must hold at least 2*kmax+1 elements each.
#[no_mangle]
pub unsafe extern "C" fn nps_tone_response(
    rx: *const NpsReceiver,
    f_in: c_double,
    probe: *const c_char,
    kmax: c_int,
    out_re: *mut c_double,
    out_im: *mut c_double,
) -> NpsStatus {
    guard(
        AssertUnwindSafe(|| {
            let (Some(rx), Some(probe)) = (rx.as_ref(), cstr(probe)) else {
                set_error("null argument");
                return NpsStatus::NpsErrArg;
            };
            if kmax < 0 || out_re.is_null() || out_im.is_null() {
                set_error("bad output buffer or kmax");
                return NpsStatus::NpsErrArg;
            }
            let Some(pid) = rx.rx.system.probe_index(probe) else {
                set_error(&format!("unknown probe '{probe}'"));
                return NpsStatus::NpsErrArg;
            };
            let tone = Tone {
                source: rx.rx.input(),
                amp: Complex64::new(1.0, 0.0),
                freq: f_in,
            };
            match periodic_steady_state(&rx.rx.system, &tone, kmax as i64) {
                Ok(resp) => {
                    for (i, k) in (-kmax..=kmax).enumerate() {
                        let c = resp.component(pid, k as i64);
                        *out_re.add(i) = c.re;
                        *out_im.add(i) = c.im;
                    }
                    NpsStatus::NpsOk
                }
                Err(e) => {
                    set_error(&e.to_string());
                    status_of(&e)
                }
            }
        }),
        NpsStatus::NpsErrInternal,
    )
}

/// Runs a linear frequency sweep. Returns null on failure with the status in
/// `status_out` (may be null).
///
/// # Safety
/// `rx` must be a live receiver handle.
#[no_mangle]
pub unsafe extern "C" fn nps_sweep_run(
    rx: *const NpsReceiver,
    f_start: c_double,
    f_stop: c_double,
    points: c_int,
    kmax: c_int,
    status_out: *mut c_int,
) -> *mut NpsSweep {
    let set_status = |s: NpsStatus| {
        if !status_out.is_null() {
            *status_out = s as c_int;
        }
    };
    guard(
        AssertUnwindSafe(|| {
            let Some(rx) = rx.as_ref() else {
                set_error("null receiver");
                set_status(NpsStatus::NpsErrArg);
                return ptr::null_mut();
            };
            if points < 1 || kmax < 0 {
                set_error("need points >= 1 and kmax >= 0");
                set_status(NpsStatus::NpsErrArg);
                return ptr::null_mut();
            }
            let grid = linear_grid(f_start, f_stop, points as usize);
            match harmonic_sweep(&rx.rx.system, rx.rx.input(), &grid, kmax as i64) {
                Ok(result) => {
                    set_status(NpsStatus::NpsOk);
                    Box::into_raw(Box::new(NpsSweep {
                        probes: rx.rx.system.probe_names.clone(),
                        result,
                    }))
                }
                Err(e) => {
                    set_error(&e.to_string());
                    set_status(status_of(&e));
                    ptr::null_mut()
                }
            }
        }),
        ptr::null_mut(),
    )
}

/// Number of sweep points.
///
/// # Safety
/// `sweep` must be a live sweep handle.
#[no_mangle]
pub unsafe extern "C" fn nps_sweep_len(sweep: *const NpsSweep) -> c_int {
    guard(
        AssertUnwindSafe(|| {
            sweep
                .as_ref()
                .map_or(-1, |s| s.result.points.len() as c_int)
        }),
        -1,
    )
}

/// Input frequency of sweep point `idx` (NaN when out of range).
///
/// # Safety
/// `sweep` must be a live sweep handle.
#[no_mangle]
pub unsafe extern "C" fn nps_sweep_frequency(sweep: *const NpsSweep, idx: c_int) -> c_double {
    guard(
        AssertUnwindSafe(|| {
            sweep
                .as_ref()
                .and_then(|s| s.result.points.get(idx as usize))
                .map_or(f64::NAN, |p| p.f_in)
        }),
        f64::NAN,
    )
}

/// Complex component k at a probe for sweep point `idx`.
///
/// # Safety
/// `sweep` must be a live sweep handle, `probe` NUL-terminated, `re`/`im`
/// valid single-value out pointers.
#[no_mangle]
pub unsafe extern "C" fn nps_sweep_component(
    sweep: *const NpsSweep,
    idx: c_int,
    probe: *const c_char,
    k: c_int,
    re: *mut c_double,
    im: *mut c_double,
) -> NpsStatus {
    guard(
        AssertUnwindSafe(|| {
            let (Some(sweep), Some(probe)) = (sweep.as_ref(), cstr(probe)) else {
                set_error("null argument");
                return NpsStatus::NpsErrArg;
            };
            if re.is_null() || im.is_null() {
                set_error("null output");
                return NpsStatus::NpsErrArg;
            }
            let Some(pid) = sweep.probes.iter().position(|p| p == probe) else {
                set_error(&format!("unknown probe '{probe}'"));
                return NpsStatus::NpsErrArg;
            };
            let Some(point) = sweep.result.points.get(idx as usize) else {
                set_error("sweep index out of range");
                return NpsStatus::NpsErrArg;
            };
            match &point.response {
                Some(resp) => {
                    let c = resp.component(pid, k as i64);
                    *re = c.re;
                    *im = c.im;
                    NpsStatus::NpsOk
                }
                None => {
                    set_error(point.error.as_deref().unwrap_or("point failed"));
                    NpsStatus::NpsErrSim
                }
            }
        }),
        NpsStatus::NpsErrInternal,
    )
}

/// Releases a sweep handle.
///
/// # Safety
/// `sweep` must come from `nps_sweep_run` (or be null) and must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn nps_sweep_free(sweep: *mut NpsSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}
