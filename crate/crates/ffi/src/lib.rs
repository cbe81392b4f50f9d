//! C ABI over the `sesqui` library.
//!
//! Processes are held behind an opaque [`SesquiSpec`] handle. Every call
//! returns a [`SesquiStatus`]; on failure the message is available from
//! [`sesqui_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sesqui::config::spec_from_json;
use sesqui::exact::{oracle_total_size, total_prob_table, TotalProbTable};
use sesqui::saddle::{asymp_total_prob, asymptotic_params, SaddleConfig};
use sesqui::survival::survival;
use sesqui::{Error, ProcessSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SesquiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Numeric = 4,
    Panic = 5,
}

/// Opaque process handle.
pub struct SesquiSpec {
    inner: ProcessSpec,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SesquiAsymptotic {
    pub x0: f64,
    pub xhat: f64,
    pub xi: f64,
    pub theta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SesquiSurvival {
    pub rho_single: f64,
    pub rho_process: f64,
    pub residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SesquiStatus, msg: impl Into<String>) -> SesquiStatus {
    set_error(msg.into());
    status
}

fn from_error(err: Error) -> SesquiStatus {
    let status = if err.is_config_error() {
        SesquiStatus::Config
    } else {
        SesquiStatus::Numeric
    };
    fail(status, err.to_string())
}

fn guard(f: impl FnOnce() -> SesquiStatus) -> SesquiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SesquiStatus::Panic, "internal panic"),
    }
}

unsafe fn spec_ref<'a>(spec: *const SesquiSpec) -> Option<&'a ProcessSpec> {
    spec.as_ref().map(|s| &s.inner)
}

/// Message for the last failing call on this thread, or null.
///
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn sesqui_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a process from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sesqui_spec_from_json(json: *const c_char, out: *mut *mut SesquiSpec) -> SesquiStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(SesquiStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(SesquiStatus::InvalidUtf8, "spec is not valid UTF-8");
        };
        match spec_from_json(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SesquiSpec { inner }));
                SesquiStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `spec` must come from [`sesqui_spec_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sesqui_spec_free(spec: *mut SesquiSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

unsafe fn write_table(
    spec: *const SesquiSpec,
    out: *mut f64,
    len: usize,
    build: impl FnOnce(&ProcessSpec, usize) -> sesqui::Result<TotalProbTable>,
) -> SesquiStatus {
    guard(|| {
        let Some(spec) = spec_ref(spec) else {
            return fail(SesquiStatus::NullPointer, "null spec");
        };
        if len == 0 {
            return SesquiStatus::Ok;
        }
        if out.is_null() {
            return fail(SesquiStatus::NullPointer, "null output buffer");
        }
        match build(spec, len - 1) {
            Ok(table) => {
                let dst = std::slice::from_raw_parts_mut(out, len);
                for (n, slot) in dst.iter_mut().enumerate() {
                    *slot = table.q(n);
                }
                SesquiStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Writes `P(N = n)` for `n = 0..len` into `out`.
///
/// # Safety
/// `spec` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sesqui_total_prob_table(spec: *const SesquiSpec, out: *mut f64, len: usize) -> SesquiStatus {
    write_table(spec, out, len, total_prob_table)
}

/// Same as [`sesqui_total_prob_table`] via the single-variable fixed point.
///
/// # Safety
/// `spec` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sesqui_oracle_total_prob(spec: *const SesquiSpec, out: *mut f64, len: usize) -> SesquiStatus {
    write_table(spec, out, len, oracle_total_size)
}

/// Exponential rate and prefactor of the total-size tail.
///
/// # Safety
/// `spec` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sesqui_asymptotic_params(
    spec: *const SesquiSpec,
    out: *mut SesquiAsymptotic,
) -> SesquiStatus {
    guard(|| {
        let Some(spec) = spec_ref(spec) else {
            return fail(SesquiStatus::NullPointer, "null spec");
        };
        if out.is_null() {
            return fail(SesquiStatus::NullPointer, "null output");
        }
        match asymptotic_params(spec, &SaddleConfig::default()) {
            Ok(p) => {
                *out = SesquiAsymptotic {
                    x0: p.x0,
                    xhat: p.xhat,
                    xi: p.xi,
                    theta: p.theta,
                };
                SesquiStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Natural log of `θ n^{-3/2} e^{-nξ}` for the given parameters.
#[no_mangle]
pub extern "C" fn sesqui_asymp_log_total_prob(params: SesquiAsymptotic, n: usize) -> f64 {
    let p = sesqui::saddle::AsymptoticParams {
        x0: params.x0,
        xhat: params.xhat,
        xi: params.xi,
        theta: params.theta,
        psi_pp: f64::NAN,
        phi_at_xhat: f64::NAN,
    };
    asymp_total_prob(&p, n).log_value
}

/// Survival probabilities of the process.
///
/// # Safety
/// `spec` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sesqui_survival(spec: *const SesquiSpec, out: *mut SesquiSurvival) -> SesquiStatus {
    guard(|| {
        let Some(spec) = spec_ref(spec) else {
            return fail(SesquiStatus::NullPointer, "null spec");
        };
        if out.is_null() {
            return fail(SesquiStatus::NullPointer, "null output");
        }
        match survival(spec) {
            Ok(s) => {
                *out = SesquiSurvival {
                    rho_single: s.rho_single,
                    rho_process: s.rho_process,
                    residual: s.residual,
                };
                SesquiStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
