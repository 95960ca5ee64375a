//! C ABI for `ivauctions`.
//!
//! Scenarios live behind an opaque handle. Every call returns an
//! [`IvaStatus`]; on failure the message is available from
//! [`iva_last_error`] until the next call on the same thread. Strings handed
//! out by the library are NUL-terminated UTF-8 and must be released with
//! [`iva_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ivauctions::cli::{experiment_command, scenario_command, Report};
use ivauctions::equilibrium::Mode;
use ivauctions::experiments::ExperimentSpec;
use ivauctions::scenario::{load_scenario, Scenario};
use ivauctions::valuation::SignalProfile;
use ivauctions::Error;

/// Status codes returned by every function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IvaStatus {
    Ok = 0,
    /// A null pointer, bad UTF-8 or an out-of-range index.
    InvalidArgument = 1,
    /// The scenario or parameters failed validation.
    Config = 2,
    /// Signals outside their spaces, shape mismatches, uncovered strategies.
    Domain = 3,
    /// The profile is not an equilibrium.
    NotEquilibrium = 4,
    Io = 5,
    UnknownExperiment = 6,
    /// A panic inside the library.
    Internal = 7,
}

/// Opaque validated scenario.
pub struct IvaScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> IvaStatus {
    match e {
        Error::Config { .. } | Error::Schema(_) | Error::InvalidModel(_) | Error::Prior(_) => {
            IvaStatus::Config
        }
        Error::Domain { .. }
        | Error::Shape(_)
        | Error::Coverage { .. }
        | Error::NoCriticalBid { .. } => IvaStatus::Domain,
        Error::NotEquilibrium { .. } => IvaStatus::NotEquilibrium,
        Error::Io(_) => IvaStatus::Io,
        Error::UnknownExperiment(_) => IvaStatus::UnknownExperiment,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (IvaStatus, String)>) -> IvaStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IvaStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&msg);
            IvaStatus::Internal
        }
    }
}

fn lib(e: Error) -> (IvaStatus, String) {
    (status_of(&e), e.to_string())
}

fn bad(msg: &str) -> (IvaStatus, String) {
    (IvaStatus::InvalidArgument, msg.to_string())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (IvaStatus, String)> {
    if p.is_null() {
        return Err(bad(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| bad(&format!("{what} is not UTF-8")))
}

unsafe fn give(out: *mut *mut c_char, s: String) -> Result<(), (IvaStatus, String)> {
    if out.is_null() {
        return Err(bad("output pointer is null"));
    }
    let c = CString::new(s).map_err(|_| bad("string contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn scenario<'a>(h: *const IvaScenario) -> Result<&'a Scenario, (IvaStatus, String)> {
    h.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| bad("scenario handle is null"))
}

unsafe fn emit(
    r: Report,
    out_json: *mut *mut c_char,
    out_pass: *mut i32,
) -> Result<(), (IvaStatus, String)> {
    let s =
        serde_json::to_string_pretty(&r.value).map_err(|e| (IvaStatus::Internal, e.to_string()))?;
    give(out_json, s)?;
    if !out_pass.is_null() {
        *out_pass = r.pass as i32;
    }
    Ok(())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn iva_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread, empty after success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn iva_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn iva_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a scenario from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iva_scenario_from_json(
    json: *const c_char,
    out: *mut *mut IvaScenario,
) -> IvaStatus {
    guard(|| {
        if out.is_null() {
            return Err(bad("output pointer is null"));
        }
        let sc = Scenario::from_json_str(text(json, "json")?).map_err(lib)?;
        *out = Box::into_raw(Box::new(IvaScenario { inner: sc }));
        Ok(())
    })
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iva_scenario_load(
    path: *const c_char,
    out: *mut *mut IvaScenario,
) -> IvaStatus {
    guard(|| {
        if out.is_null() {
            return Err(bad("output pointer is null"));
        }
        let sc = load_scenario(text(path, "path")?).map_err(lib)?;
        *out = Box::into_raw(Box::new(IvaScenario { inner: sc }));
        Ok(())
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `h` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn iva_scenario_free(h: *mut IvaScenario) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Agents and items of the scenario's model.
///
/// # Safety
/// `h` must be a live handle; `n` and `m` writable or null.
#[no_mangle]
pub unsafe extern "C" fn iva_scenario_shape(
    h: *const IvaScenario,
    n: *mut usize,
    m: *mut usize,
) -> IvaStatus {
    guard(|| {
        let sc = scenario(h)?;
        if !n.is_null() {
            *n = sc.model.n();
        }
        if !m.is_null() {
            *m = sc.model.m();
        }
        Ok(())
    })
}

/// Canonical JSON of the scenario.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iva_scenario_canonical_json(
    h: *const IvaScenario,
    out: *mut *mut c_char,
) -> IvaStatus {
    guard(|| give(out, scenario(h)?.canonical_json()))
}

/// Hex SHA-256 of the canonical JSON.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iva_scenario_hash(
    h: *const IvaScenario,
    out: *mut *mut c_char,
) -> IvaStatus {
    guard(|| give(out, scenario(h)?.hash()))
}

/// Value of agent `agent` for item `item` at `signals`, an agent-major
/// `n * m` array. Signals must lie in their spaces.
///
/// # Safety
/// `h` must be a live handle, `signals` readable for `len` values and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iva_eval(
    h: *const IvaScenario,
    agent: usize,
    item: usize,
    signals: *const f64,
    len: usize,
    out: *mut f64,
) -> IvaStatus {
    guard(|| {
        let sc = scenario(h)?;
        if signals.is_null() || out.is_null() {
            return Err(bad("null pointer"));
        }
        let (n, m) = (sc.model.n(), sc.model.m());
        if agent >= n || item >= m {
            return Err(bad(&format!("agent {agent} or item {item} out of range")));
        }
        let data = std::slice::from_raw_parts(signals, len).to_vec();
        let s = SignalProfile::new(n, m, data).map_err(lib)?;
        *out = sc.model.eval(agent, &s, Some(item)).map_err(lib)?;
        Ok(())
    })
}

/// Runs `command` (`check`, `run`, `equilibrium` or `welfare`) on the
/// scenario in `mode` (`pne`, `epe`, `bne`; null means `pne`). Writes the
/// JSON report to `out_json` and the verdict (1 pass, 0 fail) to
/// `out_pass` when it is not null.
///
/// # Safety
/// `h` must be a live handle, strings NUL-terminated, `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn iva_run(
    h: *const IvaScenario,
    command: *const c_char,
    mode: *const c_char,
    out_json: *mut *mut c_char,
    out_pass: *mut i32,
) -> IvaStatus {
    guard(|| {
        let sc = scenario(h)?;
        let command = text(command, "command")?;
        let mode: Mode = if mode.is_null() {
            Mode::Pne
        } else {
            text(mode, "mode")?.parse().map_err(lib)?
        };
        emit(
            scenario_command(command, sc, mode).map_err(lib)?,
            out_json,
            out_pass,
        )
    })
}

/// Runs a named experiment. `params_json` is a JSON object of parameters,
/// or null for the defaults.
///
/// # Safety
/// Strings must be NUL-terminated and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn iva_reproduce(
    name: *const c_char,
    params_json: *const c_char,
    out_json: *mut *mut c_char,
    out_pass: *mut i32,
) -> IvaStatus {
    guard(|| {
        let mut spec = ExperimentSpec::new(text(name, "name")?);
        if !params_json.is_null() {
            let v: serde_json::Value = serde_json::from_str(text(params_json, "params")?)
                .map_err(|e| (IvaStatus::Config, format!("params: {e}")))?;
            match v {
                serde_json::Value::Object(m) => spec.params = m,
                _ => return Err((IvaStatus::Config, "params must be a JSON object".into())),
            }
        }
        emit(experiment_command(&spec).map_err(lib)?, out_json, out_pass)
    })
}
