//! C ABI for the `gibbs-rates` library.
//!
//! Every function returns a [`GrStatus`]; results are written through out
//! pointers. On failure, [`gr_last_error`] describes the most recent error on
//! the calling thread. Chains are exposed as opaque handles that the caller
//! frees with the matching `_free` function. Strings returned by the library
//! are released with [`gr_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use gibbs_rates::bounds::{
    rosenthal_min_steps, two_term_min_steps, DriftMinorization, RosenthalParams,
};
use gibbs_rates::families::{BetaBinomialFamily, PoissonGammaFamily, XChain};
use gibbs_rates::numerics::{
    exact_min_steps, matrix_power_tv, min_steps_geometric, reversible_spectrum, GeometricTerm,
    LogMagnitude, StepCount,
};
use gibbs_rates::scan_compare::{compare, CompareConfig};
use gibbs_rates::spectral::{coupling_u, spectral_gap};
use gibbs_rates::{report, Error};

/// Outcome of a library call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrStatus {
    Ok = 0,
    /// A precondition on the arguments was violated.
    InvalidArgument = 1,
    /// A required pointer argument was null.
    NullPointer = 2,
    /// Non-convergence, insufficient truncation, or no solution.
    Numerical = 3,
    /// A Rust panic was caught at the boundary.
    Panic = 4,
}

/// A step count as two 64-bit halves: `value = hi * 2^64 + lo`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GrStepCount {
    pub lo: u64,
    pub hi: u64,
}

impl From<StepCount> for GrStepCount {
    fn from(s: StepCount) -> Self {
        GrStepCount {
            lo: s.get() as u64,
            hi: (s.get() >> 64) as u64,
        }
    }
}

/// Beta/binomial x-chain on `0..=n`.
pub struct GrBetaBinomial {
    family: BetaBinomialFamily,
    chain: XChain,
}

/// Truncated Poisson/gamma x-chain on `0..=x_max`.
pub struct GrPoissonGamma {
    family: PoissonGammaFamily,
    chain: XChain,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            GrStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(&e.to_string());
            if e.is_numerical() {
                GrStatus::Numerical
            } else {
                GrStatus::InvalidArgument
            }
        }
        Ok(Err(Failure::Null(name))) => {
            set_last_error(&format!("null pointer for `{name}`"));
            GrStatus::NullPointer
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            GrStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller guarantees a non-null `p` is valid for writes.
    unsafe { p.as_mut() }.ok_or(Failure::Null(name))
}

fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: the caller guarantees a non-null `p` came from the matching constructor.
    unsafe { p.as_ref() }.ok_or(Failure::Null(name))
}

fn invalid(msg: &str) -> Failure {
    Failure::Lib(Error::InvalidParameter {
        name: "argument",
        reason: msg.to_string(),
    })
}

/// Message for the last failed call on this thread (empty after success).
/// The pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn gr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn gr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds the beta/binomial x-chain with a Beta(a, b) prior.
///
/// # Safety
/// `out_handle` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gr_beta_binomial_new(
    n: u64,
    a: f64,
    b: f64,
    out_handle: *mut *mut GrBetaBinomial,
) -> GrStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        let family = BetaBinomialFamily::new(n, a, b)?;
        if n > gibbs_rates::scan_compare::MAX_EXACT_N {
            return Err(Error::InfeasibleN(n).into());
        }
        let chain = family.x_chain();
        *slot = Box::into_raw(Box::new(GrBetaBinomial { family, chain }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`gr_beta_binomial_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn gr_beta_binomial_free(h: *mut GrBetaBinomial) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// TV distance after `steps` steps from `start`.
///
/// # Safety
/// `h` must be a live handle and `out_tv` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gr_beta_binomial_tv(
    h: *const GrBetaBinomial,
    start: u64,
    steps: u64,
    out_tv: *mut f64,
) -> GrStatus {
    guard(|| {
        let h = handle(h, "handle")?;
        let slot = out(out_tv, "out_tv")?;
        *slot = matrix_power_tv(
            &h.chain.kernel,
            start as usize,
            &h.chain.stationary,
            steps.into(),
        )?;
        Ok(())
    })
}

/// Smallest step count with TV at most `target` from every start.
///
/// # Safety
/// `h` must be a live handle and `out_steps` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gr_beta_binomial_worst_min_steps(
    h: *const GrBetaBinomial,
    target: f64,
    out_steps: *mut u64,
) -> GrStatus {
    guard(|| {
        let h = handle(h, "handle")?;
        let slot = out(out_steps, "out_steps")?;
        if !(target > 0.0 && target < 1.0) {
            return Err(invalid("target must lie in (0, 1)"));
        }
        *slot = gibbs_rates::scan_compare::worst_start_min_steps(&h.family, target)?;
        Ok(())
    })
}

/// Second-largest eigenvalue of the x-chain.
///
/// # Safety
/// `h` must be a live handle and `out_value` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gr_beta_binomial_second_eigenvalue(
    h: *const GrBetaBinomial,
    out_value: *mut f64,
) -> GrStatus {
    guard(|| {
        let h = handle(h, "handle")?;
        let slot = out(out_value, "out_value")?;
        let values = reversible_spectrum(&h.chain.kernel, &h.chain.stationary)?;
        *slot = values.get(1).copied().unwrap_or(0.0);
        Ok(())
    })
}

/// Builds the Poisson/gamma x-chain truncated at `x_max`.
///
/// # Safety
/// `out_handle` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gr_poisson_gamma_new(
    shape: f64,
    rate: f64,
    x_max: u64,
    out_handle: *mut *mut GrPoissonGamma,
) -> GrStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        let family = PoissonGammaFamily::new(shape, rate, x_max)?;
        let chain = family.x_chain();
        *slot = Box::into_raw(Box::new(GrPoissonGamma { family, chain }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`gr_poisson_gamma_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn gr_poisson_gamma_free(h: *mut GrPoissonGamma) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Smallest step count with TV at most `target` from `start`.
///
/// # Safety
/// `h` must be a live handle and `out_steps` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gr_poisson_gamma_min_steps(
    h: *const GrPoissonGamma,
    start: u64,
    target: f64,
    out_steps: *mut u64,
) -> GrStatus {
    guard(|| {
        let h = handle(h, "handle")?;
        let slot = out(out_steps, "out_steps")?;
        if !(target > 0.0 && target < 1.0) {
            return Err(invalid("target must lie in (0, 1)"));
        }
        h.family.validate_start(start)?;
        *slot = exact_min_steps(
            &h.chain.kernel,
            start as usize,
            &h.chain.stationary,
            target,
            1_000_000,
        )?
        .ok_or(Error::NoSolution)?;
        Ok(())
    })
}

/// Smallest `l` with `sum_i c_i rho_i^(l + offset_i) <= target`.
///
/// # Safety
/// The three arrays must hold `len` readable elements; `out_steps` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gr_min_steps_geometric(
    coefficients: *const f64,
    ratios: *const f64,
    offsets: *const f64,
    len: usize,
    target: f64,
    out_steps: *mut GrStepCount,
) -> GrStatus {
    guard(|| {
        let slot = out(out_steps, "out_steps")?;
        if len == 0 {
            return Err(invalid("at least one term is required"));
        }
        let read = |p: *const f64, name| {
            if p.is_null() {
                Err(Failure::Null(name))
            } else {
                // SAFETY: the caller guarantees `len` readable elements.
                Ok(unsafe { std::slice::from_raw_parts(p, len) })
            }
        };
        let (c, r, o) = (
            read(coefficients, "coefficients")?,
            read(ratios, "ratios")?,
            read(offsets, "offsets")?,
        );
        let terms = (0..len)
            .map(|i| {
                if !(c[i] >= 0.0 && c[i].is_finite()) {
                    return Err(invalid("coefficients must be finite and nonnegative"));
                }
                Ok(GeometricTerm::new(LogMagnitude::new(c[i]), r[i], o[i])?)
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        if !(target > 0.0 && target.is_finite()) {
            return Err(invalid("target must be positive and finite"));
        }
        *slot = min_steps_geometric(&terms, LogMagnitude::new(target))?.into();
        Ok(())
    })
}

/// Drift/minorization minimal step count; `epsilon = 2^epsilon_log2`.
/// `out_log10` may be null.
///
/// # Safety
/// `out_steps` must be valid for writes; `out_log10` null or valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gr_rosenthal_min_steps(
    lambda: f64,
    b: f64,
    epsilon_log2: f64,
    v_x0: f64,
    d: f64,
    r: f64,
    target: f64,
    out_steps: *mut GrStepCount,
    out_log10: *mut f64,
) -> GrStatus {
    guard(|| {
        let slot = out(out_steps, "out_steps")?;
        let eps = LogMagnitude::from_ln(epsilon_log2 * std::f64::consts::LN_2);
        let cert = DriftMinorization::new(lambda, b, eps, v_x0)?;
        let steps = rosenthal_min_steps(&cert, &RosenthalParams::new(d, r), target)?;
        *slot = steps.into();
        // SAFETY: the caller passes null or a pointer valid for writes.
        if let Some(l) = unsafe { out_log10.as_mut() } {
            *l = steps.log10();
        }
        Ok(())
    })
}

/// Smallest `l` with `a^l + weight * b^l <= target`.
///
/// # Safety
/// `out_steps` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gr_two_term_min_steps(
    a: f64,
    b: f64,
    weight: f64,
    target: f64,
    out_steps: *mut GrStepCount,
) -> GrStatus {
    guard(|| {
        let slot = out(out_steps, "out_steps")?;
        *slot = two_term_min_steps(a, b, weight, target)?.into();
        Ok(())
    })
}

/// Random-scan spectral gap at scan weight `alpha` for product `mu * eta`.
///
/// # Safety
/// `out_gap` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gr_spectral_gap(alpha: f64, product: f64, out_gap: *mut f64) -> GrStatus {
    guard(|| {
        let slot = out(out_gap, "out_gap")?;
        *slot = spectral_gap(alpha, product)?;
        Ok(())
    })
}

/// Roots of the coupling equation. Writes 2 roots, or 1 when `mu = 0`
/// (then `out_minus` is left untouched).
///
/// # Safety
/// All out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gr_coupling_u(
    alpha: f64,
    mu: f64,
    eta: f64,
    out_plus: *mut f64,
    out_minus: *mut f64,
    out_count: *mut u32,
) -> GrStatus {
    guard(|| {
        let plus = out(out_plus, "out_plus")?;
        let minus = out(out_minus, "out_minus")?;
        let count = out(out_count, "out_count")?;
        let roots = coupling_u(alpha, mu, eta)?.roots();
        *plus = roots[0];
        if let Some(&m) = roots.get(1) {
            *minus = m;
        }
        *count = roots.len() as u32;
        Ok(())
    })
}

/// Systematic-versus-random comparison report as JSON (d, r drive the
/// drift/minorization column). Free the string with [`gr_string_free`].
///
/// # Safety
/// `out_json` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gr_compare_report_json(
    n: u64,
    max_steps: u64,
    target: f64,
    d: f64,
    r: f64,
    out_json: *mut *mut c_char,
) -> GrStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let mut cfg = CompareConfig::new(n, max_steps as usize, target);
        cfg.rosenthal = Some(RosenthalParams::new(d, r));
        let text = report::to_json(&compare(&cfg)?)?;
        *slot = CString::new(text)
            .map_err(|e| Error::Output(e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Convenience for Rust callers: the last error as an owned string.
pub fn last_error_string() -> String {
    // SAFETY: `gr_last_error` returns a valid NUL-terminated pointer.
    unsafe { CStr::from_ptr(gr_last_error()) }
        .to_string_lossy()
        .into_owned()
}
