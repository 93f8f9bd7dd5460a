//! C ABI over `landauer-fcs`.
//!
//! Every fallible entry point returns an [`LfStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`lf_last_error_message`] on the same thread until the next failing call.
//! Handles are owned by the caller and released with [`lf_experiment_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use landauer_fcs::experiment::{Experiment, PhysicsParams};
use landauer_fcs::lindblad::{propagate_fcs, FcsOptions, PropagationOptions};
use landauer_fcs::ode::Tolerances;
use landauer_fcs::protocol::ThetaMode;
use landauer_fcs::slowdrive::{validity_report, CgfComponent, SlowDrivingCgf, SlowDrivingOptions};
use landauer_fcs::trajectories::{run_ensemble, TrajectoryOptions};
use landauer_fcs::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Numerical = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfMode {
    Quantum = 0,
    Classical = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfComponent {
    Total = 0,
    Classical = 1,
    Coherent = 2,
}

/// Dimensionless parameters; energies in units of the final gap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfParams {
    pub alpha: f64,
    pub beta_eps_tau: f64,
    pub eps0_ratio: f64,
    pub gammabar_tau: f64,
    pub mode: LfMode,
}

/// Opaque experiment handle. The slow-driving expansion is built once at creation.
pub struct LfExperiment {
    exp: Experiment,
    slow: SlowDrivingCgf,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> LfStatus {
    match e {
        Error::InvalidInput(_)
        | Error::Config(_)
        | Error::OutOfRange { .. }
        | Error::TooFewSamples { .. } => LfStatus::InvalidArgument,
        _ => LfStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Result<(), (LfStatus, String)>) -> LfStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            LfStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (LfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (LfStatus, String) {
    (LfStatus::NullPointer, format!("{name} is null"))
}

fn arg(msg: impl Into<String>) -> (LfStatus, String) {
    (LfStatus::InvalidArgument, msg.into())
}

unsafe fn handle<'a>(h: *const LfExperiment) -> Result<&'a LfExperiment, (LfStatus, String)> {
    h.as_ref().ok_or_else(|| null("experiment"))
}

unsafe fn write_out<T>(out: *mut T, v: T, name: &str) -> Result<(), (LfStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(v);
    Ok(())
}

impl From<LfComponent> for CgfComponent {
    fn from(c: LfComponent) -> Self {
        match c {
            LfComponent::Total => CgfComponent::Total,
            LfComponent::Classical => CgfComponent::Classical,
            LfComponent::Coherent => CgfComponent::Coherent,
        }
    }
}

impl From<LfParams> for PhysicsParams {
    fn from(p: LfParams) -> Self {
        PhysicsParams {
            alpha: p.alpha,
            beta_eps_tau: p.beta_eps_tau,
            eps0_ratio: p.eps0_ratio,
            gammabar_tau: p.gammabar_tau,
            mode: match p.mode {
                LfMode::Quantum => ThetaMode::Quantum,
                LfMode::Classical => ThetaMode::Classical,
            },
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the next call into the library.
#[no_mangle]
pub extern "C" fn lf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Default parameter set.
#[no_mangle]
pub extern "C" fn lf_params_default() -> LfParams {
    let d = PhysicsParams::default();
    LfParams {
        alpha: d.alpha,
        beta_eps_tau: d.beta_eps_tau,
        eps0_ratio: d.eps0_ratio,
        gammabar_tau: d.gammabar_tau,
        mode: match d.mode {
            ThetaMode::Quantum => LfMode::Quantum,
            ThetaMode::Classical => LfMode::Classical,
        },
    }
}

/// Creates an experiment handle in `*out`; release it with `lf_experiment_free`.
///
/// # Safety
/// `params` must point to a valid `LfParams`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_experiment_new(
    params: *const LfParams,
    out: *mut *mut LfExperiment,
) -> LfStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let exp = Experiment::new((*p).into()).map_err(lib_err)?;
        let slow = SlowDrivingCgf::new(&exp.protocol, &exp.bath, &SlowDrivingOptions::default())
            .map_err(lib_err)?;
        out.write(Box::into_raw(Box::new(LfExperiment { exp, slow })));
        Ok(())
    })
}

/// Releases a handle. Null is a no-op.
///
/// # Safety
/// `h` must come from `lf_experiment_new` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lf_experiment_free(h: *mut LfExperiment) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Protocol duration in units of the inverse final gap.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_experiment_tau(h: *const LfExperiment, out: *mut f64) -> LfStatus {
    guard(|| write_out(out, handle(h)?.exp.tau(), "out"))
}

/// Bath temperature in units of the final gap.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_experiment_temperature(
    h: *const LfExperiment,
    out: *mut f64,
) -> LfStatus {
    guard(|| write_out(out, handle(h)?.exp.temperature(), "out"))
}

/// Largest `v/γ` and `γ/ε` along the protocol.
///
/// # Safety
/// `h` must be a live handle; both out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_validity_ratios(
    h: *const LfExperiment,
    speed: *mut f64,
    secular: *mut f64,
) -> LfStatus {
    guard(|| {
        let e = &handle(h)?.exp;
        if speed.is_null() || secular.is_null() {
            return Err(null("out"));
        }
        let r = validity_report(&e.protocol, &e.bath).map_err(lib_err)?;
        speed.write(r.max_speed_ratio);
        secular.write(r.max_secular_ratio);
        Ok(())
    })
}

/// Slow-driving cumulant generating function at counting field `u`.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_slowdrive_cgf(
    h: *const LfExperiment,
    component: LfComponent,
    u: f64,
    out: *mut f64,
) -> LfStatus {
    guard(|| {
        if !u.is_finite() {
            return Err(arg("u must be finite"));
        }
        write_out(out, handle(h)?.slow.evaluate(component.into(), u), "out")
    })
}

/// First four slow-driving cumulants written to `out[0..4]`.
///
/// # Safety
/// `h` must be a live handle; `out` must hold four doubles.
#[no_mangle]
pub unsafe extern "C" fn lf_slowdrive_cumulants(
    h: *const LfExperiment,
    component: LfComponent,
    out: *mut f64,
) -> LfStatus {
    guard(|| {
        let k = handle(h)?.slow.cumulants(component.into());
        if out.is_null() {
            return Err(null("out"));
        }
        std::ptr::copy_nonoverlapping(k.as_ptr(), out, 4);
        Ok(())
    })
}

/// Exact CGF from the tilted master equation with entropy-production boundary terms.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_exact_cgf(
    h: *const LfExperiment,
    u: f64,
    rtol: f64,
    atol: f64,
    out: *mut f64,
) -> LfStatus {
    guard(|| {
        let e = &handle(h)?.exp;
        if !(u.is_finite() && rtol > 0.0 && atol > 0.0) {
            return Err(arg("u must be finite and tolerances positive"));
        }
        let opts = FcsOptions {
            propagation: PropagationOptions {
                tol: Tolerances { rtol, atol },
                ..Default::default()
            },
            ..Default::default()
        };
        let k = propagate_fcs(&e.protocol, &e.bath, u, &opts).map_err(lib_err)?;
        write_out(out, k, "out")
    })
}

/// Runs `n` quantum-jump trajectories and writes their excess heat to `out[0..n]`.
///
/// # Safety
/// `h` must be a live handle; `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn lf_simulate_excess_heat(
    h: *const LfExperiment,
    n: usize,
    seed: u64,
    out: *mut f64,
) -> LfStatus {
    guard(|| {
        let e = &handle(h)?.exp;
        if out.is_null() {
            return Err(null("out"));
        }
        if n == 0 {
            return Err(arg("n must be positive"));
        }
        let recs = run_ensemble(&e.protocol, &e.bath, n, seed, &TrajectoryOptions::default())
            .map_err(lib_err)?;
        let dst = std::slice::from_raw_parts_mut(out, n);
        for (d, r) in dst.iter_mut().zip(&recs) {
            *d = r.excess_heat;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, LfStatus::Panic);
        let msg = unsafe { CStr::from_ptr(lf_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("boom"));
    }

    #[test]
    fn success_clears_last_error() {
        set_last_error("stale");
        assert_eq!(guard(|| Ok(())), LfStatus::Ok);
        assert!(lf_last_error_message().is_null());
    }
}
