//! C interface to the `ris-power` solver.
//!
//! Instances and results are opaque heap objects owned by the caller and
//! released with their `*_free` function. Every fallible call returns an
//! `RpStatus`; on failure a description is kept per thread and can be read
//! with `rp_last_error_message`. Panics never cross the boundary.
//!
//! Arrays of complex numbers are passed as separate real and imaginary
//! `double` arrays. Matrices are row-major.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ris_power::geometry::{union_bound_sep, MddtPair};
use ris_power::simulate::simulate_sep;
use ris_power::{BisectionConfig, ChannelSet, Error, Instance, PskConstellation, SolveResult, SymbolVector};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// Opaque problem instance: channels, symbols, constellation and targets.
pub struct RpInstance {
    inner: Instance,
}

/// Opaque solver output.
pub struct RpResult {
    inner: SolveResult,
}

/// Bisection settings. Obtain defaults from `rp_solve_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RpSolveOptions {
    pub p_lower: f64,
    pub p_upper: f64,
    pub eps_tol: f64,
    pub max_iterations: u32,
    /// How many times the upper bound may be doubled when it is infeasible.
    pub bracket_repairs: u32,
    /// Seed for the random starting point of the initialization.
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> RpStatus {
    match err {
        Error::InvalidArgument(_) | Error::Config(_) | Error::Parse { .. } | Error::NotOnManifold { .. } => {
            RpStatus::InvalidArgument
        }
        Error::Dimension { .. } => RpStatus::DimensionMismatch,
        Error::DegenerateStep { .. } | Error::NonFinite { .. } => RpStatus::Numerical,
        Error::Io(_) | Error::Csv(_) => RpStatus::Io,
    }
}

/// Runs `body`, turning errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), (RpStatus, String)>) -> RpStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RpStatus::Ok,
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
            RpStatus::Panic
        }
    }
}

fn lib(err: Error) -> (RpStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (RpStatus, String) {
    (RpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (RpStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn complex_slice(
    re: *const f64,
    im: *const f64,
    len: usize,
    what: &str,
) -> Result<Vec<Complex64>, (RpStatus, String)> {
    let re = read_slice(re, len, what)?;
    let im = read_slice(im, len, what)?;
    Ok(re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len` bytes). Returns the full message length
/// excluding the terminator, or 0 if the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn rp_solve_options_default() -> RpSolveOptions {
    let d = BisectionConfig::default();
    RpSolveOptions {
        p_lower: d.p_lower,
        p_upper: d.p_upper,
        eps_tol: d.eps_tol,
        max_iterations: d.i_max as u32,
        bracket_repairs: d.bracket_repairs,
        seed: 0,
    }
}

/// Builds an instance from explicit channels.
///
/// `h_g_re`/`h_g_im` hold the `n` generator-to-RIS gains; `h_u_re`/`h_u_im`
/// hold the `k x n` RIS-to-user gains row by row. `symbols` holds `k` symbol
/// indices in `0..alpha_s` and `targets` the `k` error-rate targets.
///
/// # Safety
/// Every pointer must reference arrays of the stated length; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rp_instance_new(
    n: usize,
    k: usize,
    alpha_s: usize,
    h_g_re: *const f64,
    h_g_im: *const f64,
    h_u_re: *const f64,
    h_u_im: *const f64,
    symbols: *const usize,
    targets: *const f64,
    noise_var: f64,
    out: *mut *mut RpInstance,
) -> RpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let h_g = complex_slice(h_g_re, h_g_im, n, "h_g")?;
        let total = n
            .checked_mul(k)
            .ok_or_else(|| (RpStatus::InvalidArgument, "n * k overflows".to_string()))?;
        let flat = complex_slice(h_u_re, h_u_im, total, "h_u")?;
        let h_u = flat.chunks(n.max(1)).take(k).map(<[_]>::to_vec).collect();
        let psk = PskConstellation::new(alpha_s).map_err(lib)?;
        let channels = ChannelSet::new(h_g, h_u, noise_var).map_err(lib)?;
        let symbols = SymbolVector::new(read_slice(symbols, k, "symbols")?.to_vec(), &psk).map_err(lib)?;
        let targets = read_slice(targets, k, "targets")?.to_vec();
        let inner = Instance::new(channels, symbols, psk, targets).map_err(lib)?;
        *out = Box::into_raw(Box::new(RpInstance { inner }));
        Ok(())
    })
}

/// Builds an instance with i.i.d. unit-variance Rayleigh channels, random
/// symbols and every target equal to `10^-tau`, all drawn from `seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_instance_new_rayleigh(
    n: usize,
    k: usize,
    alpha_s: usize,
    tau: f64,
    noise_var: f64,
    seed: u64,
    out: *mut *mut RpInstance,
) -> RpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psk = PskConstellation::new(alpha_s).map_err(lib)?;
        let channels = ChannelSet::generate_rayleigh(n, k, noise_var, &mut rng).map_err(lib)?;
        let symbols = psk.random_symbols(k, &mut rng).map_err(lib)?;
        let inner = Instance::with_tau(channels, symbols, psk, tau).map_err(lib)?;
        *out = Box::into_raw(Box::new(RpInstance { inner }));
        Ok(())
    })
}

/// # Safety
/// `inst` must be null or a pointer from an `rp_instance_new*` call that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn rp_instance_free(inst: *mut RpInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Number of RIS elements.
///
/// # Safety
/// `inst` must be a live instance or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn rp_instance_elements(inst: *const RpInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.channels.n())
}

/// Number of users.
///
/// # Safety
/// `inst` must be a live instance or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn rp_instance_users(inst: *const RpInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.channels.k())
}

/// Finds the minimum power meeting every target. `options` may be null for
/// the defaults. An instance that stays infeasible still yields a result;
/// check `rp_result_feasible`.
///
/// # Safety
/// `inst` must be a live instance, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rp_solve(
    inst: *const RpInstance,
    options: *const RpSolveOptions,
    out: *mut *mut RpResult,
) -> RpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        let opts = options.as_ref().copied().unwrap_or_else(|| rp_solve_options_default());
        let cfg = BisectionConfig {
            p_lower: opts.p_lower,
            p_upper: opts.p_upper,
            eps_tol: opts.eps_tol,
            i_max: opts.max_iterations as usize,
            bracket_repairs: opts.bracket_repairs,
            ..BisectionConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let inner = ris_power::bisect(&inst.inner, &cfg, &mut rng).map_err(lib)?;
        *out = Box::into_raw(Box::new(RpResult { inner }));
        Ok(())
    })
}

/// # Safety
/// `res` must be null or a pointer from `rp_solve` that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn rp_result_free(res: *mut RpResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Minimum power found (linear scale), or NaN for a null result.
///
/// # Safety
/// `res` must be a live result or null.
#[no_mangle]
pub unsafe extern "C" fn rp_result_power(res: *const RpResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.inner.p_opt)
}

/// `10 log10(P / noise_var)`, or NaN for a null result.
///
/// # Safety
/// `res` must be a live result or null.
#[no_mangle]
pub unsafe extern "C" fn rp_result_power_db(res: *const RpResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.inner.p_n_db)
}

/// Whether every target was met.
///
/// # Safety
/// `res` must be a live result or null (returns false).
#[no_mangle]
pub unsafe extern "C" fn rp_result_feasible(res: *const RpResult) -> bool {
    res.as_ref().is_some_and(|r| r.inner.feasible)
}

/// Bisection steps taken.
///
/// # Safety
/// `res` must be a live result or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn rp_result_iterations(res: *const RpResult) -> usize {
    res.as_ref().map_or(0, |r| r.inner.iterations)
}

/// Copies the unit-modulus reflection coefficients into `re`/`im`, which
/// must hold exactly as many entries as the instance has elements.
///
/// # Safety
/// `res` must be a live result; `re` and `im` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn rp_result_phases(res: *const RpResult, re: *mut f64, im: *mut f64, len: usize) -> RpStatus {
    guard(|| {
        let res = res.as_ref().ok_or_else(|| null("res"))?;
        let theta = &res.inner.theta_opt;
        if len != theta.len() {
            return Err(lib(Error::Dimension {
                context: "phase buffer length",
                expected: theta.len(),
                actual: len,
            }));
        }
        if re.is_null() || im.is_null() {
            return Err(null("output buffer"));
        }
        let (re, im) = (slice::from_raw_parts_mut(re, len), slice::from_raw_parts_mut(im, len));
        for (i, t) in theta.iter().enumerate() {
            re[i] = t.re;
            im[i] = t.im;
        }
        Ok(())
    })
}

/// Union bound `erfc(d1/sigma)/2 + erfc(d2/sigma)/2` on the symbol error
/// probability for boundary distances `d1`, `d2`. NaN if `sigma_w <= 0`.
#[no_mangle]
pub extern "C" fn rp_union_bound_sep(d1: f64, d2: f64, sigma_w: f64) -> f64 {
    if !(sigma_w > 0.0) {
        return f64::NAN;
    }
    union_bound_sep(MddtPair { d1, d2 }, sigma_w)
}

/// Transmits the instance's symbols through the solved phases `trials`
/// times with fresh noise and writes each user's empirical error rate to
/// `sep_out`, which must hold one entry per user.
///
/// # Safety
/// `inst` and `res` must be live and belong together; `sep_out` must point
/// to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rp_simulate(
    inst: *const RpInstance,
    res: *const RpResult,
    trials: u64,
    seed: u64,
    sep_out: *mut f64,
    len: usize,
) -> RpStatus {
    guard(|| {
        let inst = &inst.as_ref().ok_or_else(|| null("inst"))?.inner;
        let res = &res.as_ref().ok_or_else(|| null("res"))?.inner;
        if len != inst.channels.k() {
            return Err(lib(Error::Dimension {
                context: "error-rate buffer length",
                expected: inst.channels.k(),
                actual: len,
            }));
        }
        if sep_out.is_null() {
            return Err(null("sep_out"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let est = simulate_sep(
            &res.theta_opt,
            res.p_opt,
            &inst.channels,
            &inst.symbols,
            &inst.constellation,
            trials,
            &mut rng,
        )
        .map_err(lib)?;
        slice::from_raw_parts_mut(sep_out, len).copy_from_slice(&est.per_user_sep);
        Ok(())
    })
}
