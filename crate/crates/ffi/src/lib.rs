//! C ABI over `koopman_safe`.
//!
//! Conventions shared by every function:
//! - Fallible calls return a [`KsStatus`]; outputs are written only on `KS_STATUS_OK`.
//! - On failure the message is kept per thread; read it with [`ks_last_error_message`].
//! - Handles are opaque and owned by the caller until the matching `*_free`.
//! - Matrices are row-major.
//! - A null array pointer is accepted only together with a zero length.
//! - Panics are caught at the boundary and reported as `KS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use koopman_safe::control::Regime;
use koopman_safe::fxt_id::{AdaptOptions, AdaptationGains, GeneratorEstimate};
use koopman_safe::harness::{run_scenario, ScenarioConfig};
use koopman_safe::observables::{lift, make_monomial_basis, make_sinusoid_basis, BasisSet};
use koopman_safe::qp::{solve, QpProblem, QpRow, QpStatus};
use koopman_safe::Error;
use nalgebra::DVector;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// An argument or configuration was rejected.
    InvalidArgument = 2,
    /// An array length did not match the expected dimension.
    Dimension = 3,
    /// A numerical failure (degenerate lifting, blow-up, divergence, solver cap).
    Numerical = 4,
    /// The QP constraints admit no solution.
    Infeasible = 5,
    /// Reading or writing a file failed.
    Io = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

struct Failure(KsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn status_of(e: &Error) -> KsStatus {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Json(_) | Error::EmptyLog => KsStatus::InvalidArgument,
        Error::Dimension { .. } => KsStatus::Dimension,
        Error::DegenerateLifting { .. }
        | Error::NumericalBlowup { .. }
        | Error::IllConditionedData { .. }
        | Error::SolverFailure { .. }
        | Error::Divergence { .. } => KsStatus::Numerical,
        Error::ControllerInfeasible { .. } => KsStatus::Infeasible,
        Error::Io { .. } | Error::Csv { .. } => KsStatus::Io,
        Error::AtStep { source, .. } => status_of(source),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body`, converting errors and panics into a status plus a stored message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> KsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => KsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {text}"));
            KsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(KsStatus::NullPointer, format!("{what} is null"))
}

fn dimension(what: &str, expected: usize, actual: usize) -> Failure {
    Failure(KsStatus::Dimension, format!("{what}: expected length {expected}, got {actual}"))
}

/// # Safety
/// `ptr` must be null with `len == 0`, or point to `len` readable values.
unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null with `len == 0`, or point to `len` writable values.
unsafe fn output<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// # Safety
/// `ptr` must be null or a valid `T` created by this library.
unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `ptr` must be null or a valid nul-terminated string.
unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| Failure(KsStatus::InvalidArgument, format!("{what} is not UTF-8: {e}")))
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Failure(KsStatus::Panic, format!("output contains a nul byte: {e}")))
}

/// Message of the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ks_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ks_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ks_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opaque dictionary of observables.
pub struct KsBasis(BasisSet);

/// Sinusoid dictionary: optional constant, then `sqrt(2) cos` and `sqrt(2) sin`
/// of `n pi x_i` for every selected state `i` and harmonic `n`.
///
/// # Safety
/// Array arguments follow the crate conventions; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_basis_new_sinusoid(
    state_dim: usize,
    harmonics: *const u32,
    n_harmonics: usize,
    states: *const usize,
    n_states: usize,
    include_constant: bool,
    out: *mut *mut KsBasis,
) -> KsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let harmonics = input(harmonics, n_harmonics, "harmonics")?;
        let states = input(states, n_states, "states")?;
        let basis = make_sinusoid_basis(state_dim, harmonics, states, include_constant)?;
        *out = Box::into_raw(Box::new(KsBasis(basis)));
        Ok(())
    })
}

/// Monomials of total degree `1..=degree` in the selected states, plus an optional constant.
///
/// # Safety
/// Array arguments follow the crate conventions; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_basis_new_monomial(
    state_dim: usize,
    states: *const usize,
    n_states: usize,
    degree: u32,
    include_constant: bool,
    out: *mut *mut KsBasis,
) -> KsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let states = input(states, n_states, "states")?;
        let basis = make_monomial_basis(state_dim, states, degree, include_constant)?;
        *out = Box::into_raw(Box::new(KsBasis(basis)));
        Ok(())
    })
}

/// Number of observables `N` and state dimension `n`.
///
/// # Safety
/// `basis` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_basis_dims(basis: *const KsBasis, n_obs: *mut usize, state_dim: *mut usize) -> KsStatus {
    guard(|| {
        let b = &handle(basis, "basis")?.0;
        if n_obs.is_null() || state_dim.is_null() {
            return Err(null("output"));
        }
        *n_obs = b.len();
        *state_dim = b.state_dim();
        Ok(())
    })
}

/// Evaluates `psi(x)` (length `N`) and optionally its `N x n` Jacobian.
/// Pass a null `jac_out` with `jac_len == 0` to skip the Jacobian.
///
/// # Safety
/// `basis` must be a live handle; arrays follow the crate conventions.
#[no_mangle]
pub unsafe extern "C" fn ks_basis_lift(
    basis: *const KsBasis,
    x: *const f64,
    n_x: usize,
    psi_out: *mut f64,
    psi_len: usize,
    jac_out: *mut f64,
    jac_len: usize,
) -> KsStatus {
    guard(|| {
        let b = &handle(basis, "basis")?.0;
        let x = input(x, n_x, "x")?;
        if psi_len != b.len() {
            return Err(dimension("psi_out", b.len(), psi_len));
        }
        if jac_len != 0 && jac_len != b.len() * b.state_dim() {
            return Err(dimension("jac_out", b.len() * b.state_dim(), jac_len));
        }
        let frame = lift(b, x)?;
        output(psi_out, psi_len, "psi_out")?.copy_from_slice(frame.psi.as_slice());
        let jac = output(jac_out, jac_len, "jac_out")?;
        if !jac.is_empty() {
            let cols = frame.jac.ncols();
            for i in 0..frame.jac.nrows() {
                for j in 0..cols {
                    jac[i * cols + j] = frame.jac[(i, j)];
                }
            }
        }
        Ok(())
    })
}

/// Releases a basis. Null is a no-op.
///
/// # Safety
/// `basis` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ks_basis_free(basis: *mut KsBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Opaque fixed-time generator estimator.
pub struct KsEstimator {
    est: GeneratorEstimate,
    opts: AdaptOptions,
}

/// Zero-initialised estimator over `n_obs` observables with isotropic gains
/// chosen so the settling time equals `settling_time`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_estimator_new(
    n_obs: usize,
    settling_time: f64,
    a: f64,
    b: f64,
    w: f64,
    s: f64,
    out: *mut *mut KsEstimator,
) -> KsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let gains = AdaptationGains::for_settling_time(n_obs, settling_time, a, b, w, s)?;
        let est = GeneratorEstimate::zero(gains);
        *out = Box::into_raw(Box::new(KsEstimator {
            est,
            opts: AdaptOptions::default(),
        }));
        Ok(())
    })
}

/// Replaces the estimate `vec(L)` (column-stacked, length `N^2`) and resets its clock.
///
/// # Safety
/// `estimator` must be a live handle; arrays follow the crate conventions.
#[no_mangle]
pub unsafe extern "C" fn ks_estimator_set_lambda(
    estimator: *mut KsEstimator,
    lambda: *const f64,
    len: usize,
) -> KsStatus {
    guard(|| {
        let e = estimator.as_mut().ok_or_else(|| null("estimator"))?;
        let values = input(lambda, len, "lambda")?;
        e.est = GeneratorEstimate::with_initial(e.est.gains.clone(), DVector::from_column_slice(values))?;
        Ok(())
    })
}

/// One adaptation step at state `x` with measured derivative `x_dot`.
/// Writes the innovation norm left after the step to `nu_after` when non-null.
///
/// # Safety
/// Handles must be live; arrays follow the crate conventions.
#[no_mangle]
pub unsafe extern "C" fn ks_estimator_adapt(
    estimator: *mut KsEstimator,
    basis: *const KsBasis,
    x: *const f64,
    x_dot: *const f64,
    n_x: usize,
    dt: f64,
    nu_after: *mut f64,
) -> KsStatus {
    guard(|| {
        let e = estimator.as_mut().ok_or_else(|| null("estimator"))?;
        let b = &handle(basis, "basis")?.0;
        let frame = lift(b, input(x, n_x, "x")?)?;
        let report = e.est.adapt(&frame, input(x_dot, n_x, "x_dot")?, dt, &e.opts)?;
        if !nu_after.is_null() {
            *nu_after = report.nu_after;
        }
        Ok(())
    })
}

/// Copies the current `vec(L)` estimate into `out` (length `N^2`).
///
/// # Safety
/// `estimator` must be a live handle; arrays follow the crate conventions.
#[no_mangle]
pub unsafe extern "C" fn ks_estimator_lambda(estimator: *const KsEstimator, out: *mut f64, len: usize) -> KsStatus {
    guard(|| {
        let e = handle(estimator, "estimator")?;
        let n = e.est.lambda_hat.len();
        if len != n {
            return Err(dimension("out", n, len));
        }
        output(out, len, "out")?.copy_from_slice(e.est.lambda_hat.as_slice());
        Ok(())
    })
}

/// Settling time `T` and the adaptation clock `t`.
///
/// # Safety
/// `estimator` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_estimator_times(
    estimator: *const KsEstimator,
    settling_time: *mut f64,
    t: *mut f64,
) -> KsStatus {
    guard(|| {
        let e = handle(estimator, "estimator")?;
        if settling_time.is_null() || t.is_null() {
            return Err(null("output"));
        }
        *settling_time = e.est.settling_time();
        *t = e.est.t;
        Ok(())
    })
}

/// Releases an estimator. Null is a no-op.
///
/// # Safety
/// `estimator` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ks_estimator_free(estimator: *mut KsEstimator) {
    if !estimator.is_null() {
        drop(Box::from_raw(estimator));
    }
}

/// Solves `min 0.5 |u - u0|^2` subject to `A u >= b`, with `A` row-major `n_rows x m`.
/// `multipliers_out` (length `n_rows`) and `kkt_out` may be null.
/// Returns `KS_STATUS_INFEASIBLE` when the rows admit no point.
///
/// # Safety
/// Arrays follow the crate conventions; `u_out` has length `m`.
#[no_mangle]
pub unsafe extern "C" fn ks_qp_solve(
    u0: *const f64,
    m: usize,
    a: *const f64,
    b: *const f64,
    n_rows: usize,
    u_out: *mut f64,
    multipliers_out: *mut f64,
    kkt_out: *mut f64,
) -> KsStatus {
    guard(|| {
        let u0 = input(u0, m, "u0")?;
        let a = input(a, n_rows * m, "a")?;
        let b = input(b, n_rows, "b")?;
        let rows = a
            .chunks_exact(m.max(1))
            .zip(b)
            .map(|(a, &b)| QpRow { a: a.to_vec(), b })
            .collect();
        let sol = solve(&QpProblem::new(u0.to_vec(), rows)?)?;
        if sol.status == QpStatus::Infeasible {
            return Err(Failure(KsStatus::Infeasible, "QP constraints are infeasible".into()));
        }
        output(u_out, m, "u_out")?.copy_from_slice(&sol.u_star);
        if !multipliers_out.is_null() {
            output(multipliers_out, n_rows, "multipliers_out")?.copy_from_slice(&sol.multipliers);
        }
        if !kkt_out.is_null() {
            *kkt_out = sol.kkt_residual;
        }
        Ok(())
    })
}

/// Built-in case-study configuration as JSON. Free with [`ks_string_free`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_scenario_default_config(out: *mut *mut c_char) -> KsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = owned_string(ScenarioConfig::paper_case_study().to_json()?)?;
        Ok(())
    })
}

/// Runs one closed-loop scenario and returns its summary as JSON.
/// A null `config_json` selects the built-in case study.
/// `regime` is one of `nominal`, `naive`, `robust`, `robust-adaptive`.
/// Free the summary with [`ks_string_free`].
///
/// # Safety
/// Strings must be nul-terminated; `summary_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_run_scenario(
    config_json: *const c_char,
    regime: *const c_char,
    seed: u64,
    noise: bool,
    summary_json: *mut *mut c_char,
) -> KsStatus {
    guard(|| {
        if summary_json.is_null() {
            return Err(null("summary_json"));
        }
        let cfg = if config_json.is_null() {
            ScenarioConfig::paper_case_study()
        } else {
            ScenarioConfig::from_json(text(config_json, "config_json")?)?
        };
        let regime: Regime = text(regime, "regime")?.parse()?;
        let log = run_scenario(&cfg, regime, seed, noise)?;
        let json = serde_json::to_string(&log.summary).map_err(Error::from)?;
        *summary_json = owned_string(json)?;
        Ok(())
    })
}
