//! C ABI over the fracops scenario runner.
//!
//! Handles are opaque; every fallible call returns a status code and leaves
//! a message for [`fracops_last_error`] on failure. Strings returned through
//! out-parameters are owned by the caller and must be released with
//! [`fracops_string_free`].

use fracops::config::{build_operator, load_config, run_scenario, RunConfig};
use fracops::error::Error;
use fracops::kernels::check_hypothesis_h;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Outcome of an ABI call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FracopsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The configuration failed to parse or validate.
    Config = 3,
    /// Scenario parameters violate a mathematical precondition.
    Domain = 4,
    /// A scenario index was out of range.
    Index = 5,
    /// At least one matrix family has a non-invertible pairwise difference.
    HypothesisViolated = 6,
    /// Unexpected internal failure; see the last-error message.
    Internal = 7,
}

/// Parsed scenario suite plus the exact source text it echoes into reports.
pub struct FracopsConfig {
    cfg: RunConfig,
    text: String,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let clean: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(clean).unwrap());
}

fn fail(status: FracopsStatus, msg: &str) -> FracopsStatus {
    set_last_error(msg);
    status
}

fn error_status(e: &Error) -> FracopsStatus {
    match e {
        Error::Config(_) | Error::Json(_) => FracopsStatus::Config,
        Error::Io(_) => FracopsStatus::Internal,
        _ => FracopsStatus::Domain,
    }
}

fn guarded(body: impl FnOnce() -> FracopsStatus) -> FracopsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic with non-string payload".to_string());
            fail(FracopsStatus::Internal, &msg)
        }
    }
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> FracopsStatus {
    let clean: String = s.chars().filter(|&c| c != '\0').collect();
    *out = CString::new(clean).unwrap().into_raw();
    FracopsStatus::Ok
}

/// Message describing the most recent failure on this thread.
///
/// The pointer stays valid until the next failing call on the same thread;
/// an empty string means no failure has been recorded yet.
#[no_mangle]
pub extern "C" fn fracops_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn fracops_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parse a JSON scenario suite.
///
/// # Safety
/// `text` must point to a nul-terminated string and `out` to writable
/// storage for one pointer. On success `*out` owns the suite and must be
/// released with [`fracops_config_free`].
#[no_mangle]
pub unsafe extern "C" fn fracops_config_parse(
    text: *const c_char,
    out: *mut *mut FracopsConfig,
) -> FracopsStatus {
    if text.is_null() || out.is_null() {
        return fail(FracopsStatus::NullPointer, "null pointer argument");
    }
    let text = match CStr::from_ptr(text).to_str() {
        Ok(t) => t.to_string(),
        Err(e) => return fail(FracopsStatus::InvalidUtf8, &format!("{e}")),
    };
    guarded(|| match load_config(&text) {
        Ok(cfg) => {
            *out = Box::into_raw(Box::new(FracopsConfig { cfg, text }));
            FracopsStatus::Ok
        }
        Err(e) => fail(error_status(&e), &format!("{e}")),
    })
}

/// Load the scenario suite compiled into the library.
///
/// # Safety
/// `out` must point to writable storage for one pointer; on success `*out`
/// must be released with [`fracops_config_free`].
#[no_mangle]
pub unsafe extern "C" fn fracops_config_default(out: *mut *mut FracopsConfig) -> FracopsStatus {
    if out.is_null() {
        return fail(FracopsStatus::NullPointer, "null pointer argument");
    }
    guarded(|| {
        let text = fracops::cli::DEFAULT_CONFIG.to_string();
        match load_config(&text) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(FracopsConfig { cfg, text }));
                FracopsStatus::Ok
            }
            Err(e) => fail(error_status(&e), &format!("{e}")),
        }
    })
}

/// Release a suite handle; null is ignored.
///
/// # Safety
/// `cfg` must be null or a pointer obtained from a config constructor that
/// has not been freed already.
#[no_mangle]
pub unsafe extern "C" fn fracops_config_free(cfg: *mut FracopsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of scenarios in the suite.
///
/// # Safety
/// `cfg` must be a live config handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fracops_config_scenario_count(
    cfg: *const FracopsConfig,
    out: *mut usize,
) -> FracopsStatus {
    if cfg.is_null() || out.is_null() {
        return fail(FracopsStatus::NullPointer, "null pointer argument");
    }
    *out = (*cfg).cfg.scenarios.len();
    FracopsStatus::Ok
}

/// Name of one scenario, returned as a caller-owned string.
///
/// # Safety
/// `cfg` must be a live config handle and `out` writable; release `*out`
/// with [`fracops_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fracops_config_scenario_name(
    cfg: *const FracopsConfig,
    index: usize,
    out: *mut *mut c_char,
) -> FracopsStatus {
    if cfg.is_null() || out.is_null() {
        return fail(FracopsStatus::NullPointer, "null pointer argument");
    }
    let handle = &*cfg;
    match handle.cfg.scenarios.get(index) {
        Some(sc) => write_string(out, sc.name.clone()),
        None => fail(
            FracopsStatus::Index,
            &format!(
                "scenario index {index} out of range ({} scenarios)",
                handle.cfg.scenarios.len()
            ),
        ),
    }
}

unsafe fn run_one(handle: &FracopsConfig, index: usize) -> Result<String, (FracopsStatus, String)> {
    let sc = handle.cfg.scenarios.get(index).ok_or_else(|| {
        (
            FracopsStatus::Index,
            format!(
                "scenario index {index} out of range ({} scenarios)",
                handle.cfg.scenarios.len()
            ),
        )
    })?;
    let report = run_scenario(sc, &handle.cfg.seeds, handle.cfg.thresholds.tau, &handle.text)
        .map_err(|e| (error_status(&e), format!("{e}")))?;
    serde_json::to_string(&report).map_err(|e| (FracopsStatus::Internal, format!("{e}")))
}

/// Run one scenario at its grid size and at double resolution; `*out_json`
/// receives the report serialized as JSON.
///
/// # Safety
/// `cfg` must be a live config handle and `out_json` writable; release
/// `*out_json` with [`fracops_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fracops_run_scenario(
    cfg: *const FracopsConfig,
    index: usize,
    out_json: *mut *mut c_char,
) -> FracopsStatus {
    if cfg.is_null() || out_json.is_null() {
        return fail(FracopsStatus::NullPointer, "null pointer argument");
    }
    guarded(|| match run_one(&*cfg, index) {
        Ok(json) => write_string(out_json, json),
        Err((status, msg)) => fail(status, &msg),
    })
}

/// Run every scenario in order; `*out_json` receives a JSON array of
/// reports identical to the report.json emitted by the command line.
///
/// # Safety
/// `cfg` must be a live config handle and `out_json` writable; release
/// `*out_json` with [`fracops_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fracops_run_all(
    cfg: *const FracopsConfig,
    out_json: *mut *mut c_char,
) -> FracopsStatus {
    if cfg.is_null() || out_json.is_null() {
        return fail(FracopsStatus::NullPointer, "null pointer argument");
    }
    guarded(|| {
        let handle = &*cfg;
        let mut reports = Vec::with_capacity(handle.cfg.scenarios.len());
        for index in 0..handle.cfg.scenarios.len() {
            match run_one(handle, index) {
                Ok(json) => reports.push(json),
                Err((status, msg)) => return fail(status, &msg),
            }
        }
        write_string(out_json, format!("[{}]", reports.join(",")))
    })
}

/// Check the invertibility hypothesis for every scenario kernel and write a
/// JSON summary; returns `HypothesisViolated` when any family fails.
///
/// # Safety
/// `cfg` must be a live config handle and `out_json` writable; release
/// `*out_json` with [`fracops_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fracops_check_kernels(
    cfg: *const FracopsConfig,
    out_json: *mut *mut c_char,
) -> FracopsStatus {
    if cfg.is_null() || out_json.is_null() {
        return fail(FracopsStatus::NullPointer, "null pointer argument");
    }
    guarded(|| {
        let handle = &*cfg;
        let mut rows = Vec::new();
        let mut violated = false;
        for sc in &handle.cfg.scenarios {
            let op = match build_operator(&sc.operator, sc.grid.dim) {
                Ok(op) => op,
                Err(e) => return fail(error_status(&e), &format!("{e}")),
            };
            let report = check_hypothesis_h(op.kernel().matrices());
            violated |= !report.pass;
            rows.push(serde_json::json!({
                "scenario": sc.name,
                "pass": report.pass,
                "min_det": report.min_det,
                "m": op.kernel().m(),
                "alpha_total": op.kernel().alpha_total(),
            }));
        }
        let json = serde_json::Value::Array(rows).to_string();
        let status = write_string(out_json, json);
        if status != FracopsStatus::Ok {
            return status;
        }
        if violated {
            fail(
                FracopsStatus::HypothesisViolated,
                "hypothesis (H) violated: some pairwise matrix difference is singular",
            )
        } else {
            FracopsStatus::Ok
        }
    })
}

/// Release a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn fracops_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
