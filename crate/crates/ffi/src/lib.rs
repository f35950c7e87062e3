//! C ABI over `proactive-core`.
//!
//! Every fallible call returns a [`ProactiveStatus`]; on failure the message
//! is available from [`proactive_last_error`] until the next call on the same
//! thread. Handles are opaque and must be released with the matching
//! `*_free` function. Panics are caught at the boundary and reported as
//! `PROACTIVE_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use proactive_core::config::{self, Format};
use proactive_core::model::Scenario;
use proactive_core::policy::{compile_ti, compile_tv, PolicyTable};
use proactive_core::sim::{self, SimConfig};
use proactive_core::solver::{self, BoundModel, LowerBoundSolution, SolverOptions};
use proactive_core::trace::{quantize_rsrp, QuantizerThresholds};
use proactive_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProactiveStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidScenario = 3,
    Config = 4,
    NotConverged = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProactiveFormat {
    Toml = 0,
    Json = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProactiveModel {
    /// Time-invariant bound; `window` is ignored.
    TimeInvariant = 0,
    /// Window a whole number of periods; `window` is ignored.
    TimeVarying = 1,
    /// Arbitrary window length.
    General = 2,
    /// Picks the model matching `window` and the scenario period.
    Auto = 3,
}

pub struct ProactiveScenario(Scenario);

pub struct ProactiveSolution(LowerBoundSolution);

pub struct ProactivePolicy(PolicyTable);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: ProactiveStatus, msg: impl Into<String>) -> ProactiveStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> ProactiveStatus {
    match e {
        Error::InvalidScenario(_) | Error::NonPositiveGain { .. } => ProactiveStatus::InvalidScenario,
        Error::Config(_) => ProactiveStatus::Config,
        _ => ProactiveStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (ProactiveStatus, String)>) -> ProactiveStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ProactiveStatus::Ok,
        Ok(Err((status, msg))) => fail(status, msg),
        Err(_) => fail(ProactiveStatus::Internal, "internal panic"),
    }
}

fn lift(e: Error) -> (ProactiveStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ProactiveStatus, String) {
    (ProactiveStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (ProactiveStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (ProactiveStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn proactive_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses and validates a scenario document.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn proactive_scenario_from_str(
    text: *const c_char,
    format: ProactiveFormat,
    out: *mut *mut ProactiveScenario,
) -> ProactiveStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| (ProactiveStatus::InvalidArgument, "text is not UTF-8".to_string()))?;
        let format = match format {
            ProactiveFormat::Toml => Format::Toml,
            ProactiveFormat::Json => Format::Json,
        };
        let s = config::scenario_from_str(text, format).map_err(lift)?;
        write(out, Box::into_raw(Box::new(ProactiveScenario(s))), "out")
    })
}

/// # Safety
/// `scenario` must come from [`proactive_scenario_from_str`] or be null.
#[no_mangle]
pub unsafe extern "C" fn proactive_scenario_free(scenario: *mut ProactiveScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn proactive_scenario_users(scenario: *const ProactiveScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.0.users())
}

/// # Safety
/// `scenario` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn proactive_scenario_period(scenario: *const ProactiveScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.0.period())
}

/// Expected per-slot cost of serving every request in its own slot.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn proactive_reactive_cost(
    scenario: *const ProactiveScenario,
    out: *mut f64,
) -> ProactiveStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?;
        let c = sim::reactive_cost(&s.0).map_err(lift)?;
        write(out, c, "out")
    })
}

/// Solves a lower bound with default solver options. A solution that fails
/// to converge is still returned through `out`, with status
/// `PROACTIVE_STATUS_NOT_CONVERGED`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn proactive_solve(
    scenario: *const ProactiveScenario,
    model: ProactiveModel,
    window: usize,
    out: *mut *mut ProactiveSolution,
) -> ProactiveStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = match model {
            ProactiveModel::TimeInvariant => BoundModel::TimeInvariant,
            ProactiveModel::TimeVarying => BoundModel::TimeVarying,
            ProactiveModel::General => BoundModel::General { window },
            ProactiveModel::Auto => proactive_core::experiments::bound_model_for(window, s.0.period()),
        };
        let sol = solver::solve(model, &s.0, &SolverOptions::default()).map_err(lift)?;
        let diag = sol.diagnostics;
        out.write(Box::into_raw(Box::new(ProactiveSolution(sol))));
        if diag.converged {
            Ok(())
        } else {
            Err((
                ProactiveStatus::NotConverged,
                format!(
                    "solver stopped after {} iterations with projected gradient norm {:e}",
                    diag.iterations, diag.projected_gradient_norm
                ),
            ))
        }
    })
}

/// # Safety
/// `solution` must come from [`proactive_solve`] or be null.
#[no_mangle]
pub unsafe extern "C" fn proactive_solution_free(solution: *mut ProactiveSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn proactive_solution_bound(
    solution: *const ProactiveSolution,
    out: *mut f64,
) -> ProactiveStatus {
    guard(|| {
        let s = deref(solution, "solution")?;
        write(out, s.0.bound, "out")
    })
}

/// Number of table entries and, when `buf` is non-null, a copy of up to
/// `len` of them in storage order.
///
/// # Safety
/// `buf` must be null or point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn proactive_solution_values(
    solution: *const ProactiveSolution,
    buf: *mut f64,
    len: usize,
    out_count: *mut usize,
) -> ProactiveStatus {
    guard(|| {
        let s = deref(solution, "solution")?;
        let values = s.0.mu.values();
        if !buf.is_null() {
            let n = len.min(values.len());
            ptr::copy_nonoverlapping(values.as_ptr(), buf, n);
        }
        write(out_count, values.len(), "out_count")
    })
}

/// Compiles the proactive policy for a window of `window` slots.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn proactive_compile(
    scenario: *const ProactiveScenario,
    solution: *const ProactiveSolution,
    window: usize,
    out: *mut *mut ProactivePolicy,
) -> ProactiveStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?;
        let sol = deref(solution, "solution")?;
        let users = s.0.users();
        let policy = match sol.0.model {
            BoundModel::TimeInvariant => compile_ti(&sol.0, window, users),
            _ => compile_tv(&sol.0, window, s.0.period(), users),
        }
        .map_err(lift)?;
        write(out, Box::into_raw(Box::new(ProactivePolicy(policy))), "out")
    })
}

/// The reactive baseline as a policy handle.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn proactive_reactive_policy(
    scenario: *const ProactiveScenario,
    out: *mut *mut ProactivePolicy,
) -> ProactiveStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?;
        let p = PolicyTable::reactive(s.0.users(), s.0.service_size);
        write(out, Box::into_raw(Box::new(ProactivePolicy(p))), "out")
    })
}

/// # Safety
/// `policy` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn proactive_policy_free(policy: *mut ProactivePolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Monte-Carlo estimate of the per-slot cost of `policy`, with the default
/// burn-in.
///
/// # Safety
/// Pointers must be valid; `out_stderr` may be null.
#[no_mangle]
pub unsafe extern "C" fn proactive_simulate(
    scenario: *const ProactiveScenario,
    policy: *const ProactivePolicy,
    horizon: usize,
    replications: usize,
    seed: u64,
    out_mean: *mut f64,
    out_stderr: *mut f64,
) -> ProactiveStatus {
    guard(|| {
        let s = deref(scenario, "scenario")?;
        let p = deref(policy, "policy")?;
        if out_mean.is_null() {
            return Err(null("out_mean"));
        }
        let cfg = SimConfig {
            horizon,
            replications,
            seed,
            burn_in: None,
            record_per_period: false,
        };
        let r = sim::run(&s.0, &p.0, &cfg).map_err(lift)?;
        out_mean.write(r.cost.mean);
        if !out_stderr.is_null() {
            out_stderr.write(r.cost.stderr);
        }
        Ok(())
    })
}

/// Channel state index (1 = worst) of an RSRP reading under the default
/// thresholds.
#[no_mangle]
pub extern "C" fn proactive_quantize_rsrp(rsrp_dbm: f64) -> u32 {
    quantize_rsrp(rsrp_dbm, &QuantizerThresholds::default()) as u32
}
