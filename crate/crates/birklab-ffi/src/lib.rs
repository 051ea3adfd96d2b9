//! C ABI for the birklab numerical laboratory.
//!
//! Conventions: every fallible call returns a [`BlStatus`]; results come
//! back through out-pointers; heap objects (maps, pressure solvers) are
//! opaque handles with `_new`/`_free` pairs. Passing a null handle or
//! out-pointer yields `BL_STATUS_NULL_POINTER`, never a crash.
//!
//! The matching header `include/birklab.h` is generated by cbindgen at
//! build time.
//!
//! Out-pointers and handles are null-checked before every dereference;
//! the remaining pointer validity obligations are the usual ones any C
//! API carries, so these externs stay callable without `unsafe` on the
//! Rust side.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::ffi::{c_char, c_int, CStr};
use std::sync::Arc;

use birklab::deviation::{self, Experiment, LdParams, RateHandle, SampleSource};
use birklab::error::Error;
use birklab::maps::{self, IntervalMap, Observable};
use birklab::pressure::{PressureSolver, SolverConfig};
use birklab::{cf, gaussian};

/// Status codes for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlStatus {
    Ok = 0,
    Domain = 1,
    Precondition = 2,
    OrbitTerminated = 3,
    PrecisionExhausted = 4,
    InsufficientDigits = 5,
    Range = 6,
    Solver = 7,
    Consistency = 8,
    TailCertification = 9,
    Integrity = 10,
    Config = 11,
    Cache = 12,
    Io = 13,
    NullPointer = 14,
    InvalidUtf8 = 15,
    Overflow = 16,
}

fn status_of(e: &Error) -> BlStatus {
    match e {
        Error::Domain(_) => BlStatus::Domain,
        Error::Precondition(_) => BlStatus::Precondition,
        Error::OrbitTerminated { .. } => BlStatus::OrbitTerminated,
        Error::PrecisionExhausted { .. } => BlStatus::PrecisionExhausted,
        Error::InsufficientDigits { .. } => BlStatus::InsufficientDigits,
        Error::Range(_) => BlStatus::Range,
        Error::Solver(_) => BlStatus::Solver,
        Error::Consistency(_) => BlStatus::Consistency,
        Error::TailCertification(_) => BlStatus::TailCertification,
        Error::Integrity(_) => BlStatus::Integrity,
        Error::Config(_) => BlStatus::Config,
        Error::Cache(_) => BlStatus::Cache,
        Error::Io(_) => BlStatus::Io,
    }
}

/// Static name of a status code ("ok", "domain", …); never null.
#[no_mangle]
pub extern "C" fn bl_status_name(status: BlStatus) -> *const c_char {
    let name: &'static CStr = match status {
        BlStatus::Ok => c"ok",
        BlStatus::Domain => c"domain",
        BlStatus::Precondition => c"precondition",
        BlStatus::OrbitTerminated => c"orbit-terminated",
        BlStatus::PrecisionExhausted => c"precision-exhausted",
        BlStatus::InsufficientDigits => c"insufficient-digits",
        BlStatus::Range => c"range",
        BlStatus::Solver => c"solver",
        BlStatus::Consistency => c"consistency",
        BlStatus::TailCertification => c"tail-certification",
        BlStatus::Integrity => c"integrity",
        BlStatus::Config => c"config",
        BlStatus::Cache => c"cache",
        BlStatus::Io => c"io",
        BlStatus::NullPointer => c"null-pointer",
        BlStatus::InvalidUtf8 => c"invalid-utf8",
        BlStatus::Overflow => c"overflow",
    };
    name.as_ptr()
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn bl_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Lévy's constant γ = π²/(12 log 2).
#[no_mangle]
pub extern "C" fn bl_levy_gamma() -> f64 {
    birklab::levy_gamma()
}

/// The Gauss map's generic Lyapunov exponent 2γ.
#[no_mangle]
pub extern "C" fn bl_gauss_lyapunov() -> f64 {
    birklab::gauss_lyapunov()
}

macro_rules! out_write {
    ($ptr:expr, $value:expr) => {{
        if $ptr.is_null() {
            return BlStatus::NullPointer;
        }
        unsafe { *$ptr = $value };
    }};
}

macro_rules! try_ffi {
    ($expr:expr) => {
        match $expr {
            Ok(v) => v,
            Err(e) => return status_of(&e),
        }
    };
}

// ---------------------------------------------------------------------
// Gaussian analytics
// ---------------------------------------------------------------------

/// Standard normal distribution function Φ(x).
#[no_mangle]
pub extern "C" fn bl_phi_cdf(x: f64, out: *mut f64) -> BlStatus {
    let v = try_ffi!(gaussian::phi_cdf(x));
    out_write!(out, v);
    BlStatus::Ok
}

/// Mills-ratio bounds: lower ≤ Φ(−x) ≤ upper for x > 0.
#[no_mangle]
pub extern "C" fn bl_mills_bounds(x: f64, lower: *mut f64, upper: *mut f64) -> BlStatus {
    let (lo, hi) = try_ffi!(gaussian::mills_bounds(x));
    out_write!(lower, lo);
    out_write!(upper, hi);
    BlStatus::Ok
}

/// Report of the Heyde series Σ Φ(−ρ√n).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BlGaussianSumReport {
    pub rho: f64,
    pub value: f64,
    pub scaled: f64,
    pub truncation_n: u64,
    pub tail_bound: f64,
}

/// Σ_{n≥0} Φ(−ρ√n) with a certified truncation; `scaled` = ρ²·value
/// lies in [1/2, 1/2 + ρ²].
#[no_mangle]
pub extern "C" fn bl_heyde_gaussian_sum(rho: f64, out: *mut BlGaussianSumReport) -> BlStatus {
    let r = try_ffi!(gaussian::heyde_gaussian_sum(rho));
    out_write!(
        out,
        BlGaussianSumReport {
            rho: r.rho,
            value: r.value,
            scaled: r.scaled,
            truncation_n: r.truncation_n,
            tail_bound: r.tail_bound,
        }
    );
    BlStatus::Ok
}

/// ρ²·Σ_{n≥K/ρ²} Φ(−ρ√n), the scaled far tail.
#[no_mangle]
pub extern "C" fn bl_tail_gaussian_sum(rho: f64, k: f64, out: *mut f64) -> BlStatus {
    let v = try_ffi!(gaussian::tail_gaussian_sum(rho, k));
    out_write!(out, v);
    BlStatus::Ok
}

/// IV(ε) = Σ Φ(−ε√n/σ)/n, the log-weighted Gaussian series.
#[no_mangle]
pub extern "C" fn bl_log_weighted_gaussian_sum(eps: f64, sigma: f64, out: *mut f64) -> BlStatus {
    let v = try_ffi!(gaussian::log_weighted_gaussian_sum(eps, sigma));
    out_write!(out, v);
    BlStatus::Ok
}

// ---------------------------------------------------------------------
// Interval maps
// ---------------------------------------------------------------------

/// Opaque interval-map handle.
pub struct BlMap {
    map: Arc<IntervalMap>,
}

fn parse_cstr<'a>(s: *const c_char) -> Result<&'a str, BlStatus> {
    if s.is_null() {
        return Err(BlStatus::NullPointer);
    }
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| BlStatus::InvalidUtf8)
}

/// Create a map by registry id ("gauss" or "binary"); null on failure.
#[no_mangle]
pub extern "C" fn bl_map_new(id: *const c_char) -> *mut BlMap {
    let Ok(id) = parse_cstr(id) else {
        return std::ptr::null_mut();
    };
    match maps::map_by_id(id) {
        Ok(map) => Box::into_raw(Box::new(BlMap { map: Arc::new(map) })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Release a map handle (null is a no-op).
#[no_mangle]
pub extern "C" fn bl_map_free(map: *mut BlMap) {
    if !map.is_null() {
        drop(unsafe { Box::from_raw(map) });
    }
}

/// T(x); branch endpoints report orbit termination.
#[no_mangle]
pub extern "C" fn bl_map_apply(map: *const BlMap, x: f64, out: *mut f64) -> BlStatus {
    let Some(handle) = (unsafe { map.as_ref() }) else {
        return BlStatus::NullPointer;
    };
    let v = try_ffi!(handle.map.apply(x));
    out_write!(out, v);
    BlStatus::Ok
}

/// log |T′(x)|.
#[no_mangle]
pub extern "C" fn bl_map_log_derivative(map: *const BlMap, x: f64, out: *mut f64) -> BlStatus {
    let Some(handle) = (unsafe { map.as_ref() }) else {
        return BlStatus::NullPointer;
    };
    let v = try_ffi!(handle.map.log_derivative(x));
    out_write!(out, v);
    BlStatus::Ok
}

fn observable_for(handle: &BlMap, id: *const c_char) -> Result<Observable, BlStatus> {
    let id = parse_cstr(id)?;
    maps::observable_by_id(id, &handle.map).map_err(|e| status_of(&e))
}

/// Sₙf(x) for a registry observable ("log-deriv", "bit", "zero",
/// "constant:`<v>`").
#[no_mangle]
pub extern "C" fn bl_map_birkhoff_sum(
    map: *const BlMap,
    observable: *const c_char,
    x: f64,
    n: usize,
    out: *mut f64,
) -> BlStatus {
    let Some(handle) = (unsafe { map.as_ref() }) else {
        return BlStatus::NullPointer;
    };
    let obs = match observable_for(handle, observable) {
        Ok(o) => o,
        Err(s) => return s,
    };
    let v = try_ffi!(handle.map.birkhoff_sum(&obs, x, n));
    out_write!(out, v);
    BlStatus::Ok
}

/// Sampled verification report of the map conditions.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BlConditionReport {
    pub min_iterate_derivative: f64,
    pub max_distortion: f64,
    pub uncovered_length: f64,
    pub markov_covering: bool,
    pub partition_ok: bool,
    pub expansion_ok: bool,
    pub distortion_ok: bool,
    pub passed: bool,
}

/// Probe the expansion/distortion/Markov/partition conditions.
#[no_mangle]
pub extern "C" fn bl_map_verify_conditions(
    map: *const BlMap,
    probe_count: usize,
    out: *mut BlConditionReport,
) -> BlStatus {
    let Some(handle) = (unsafe { map.as_ref() }) else {
        return BlStatus::NullPointer;
    };
    let r = try_ffi!(handle.map.verify_conditions(probe_count));
    out_write!(
        out,
        BlConditionReport {
            min_iterate_derivative: r.min_iterate_derivative,
            max_distortion: r.max_distortion,
            uncovered_length: r.uncovered_length,
            markov_covering: r.markov_covering,
            partition_ok: r.partition_ok,
            expansion_ok: r.expansion_ok,
            distortion_ok: r.distortion_ok,
            passed: r.passed,
        }
    );
    BlStatus::Ok
}

/// Monte Carlo (Λₙ⁺(ε), Λₙ⁻(ε)) with binomial standard errors, keyed by
/// (seed, n, sample index).
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn bl_map_estimate_lambda_n(
    map: *const BlMap,
    observable: *const c_char,
    n: usize,
    eps: f64,
    samples: usize,
    seed: u64,
    lambda_plus: *mut f64,
    lambda_minus: *mut f64,
    stderr_plus: *mut f64,
    stderr_minus: *mut f64,
) -> BlStatus {
    let Some(handle) = (unsafe { map.as_ref() }) else {
        return BlStatus::NullPointer;
    };
    let obs = match observable_for(handle, observable) {
        Ok(o) => o,
        Err(s) => return s,
    };
    let exp = Experiment {
        source: SampleSource::Map {
            map: handle.map.clone(),
            observable: Arc::new(obs),
        },
        eps_grid: vec![eps],
        n_max: n,
        samples,
        seed,
        ld: LdParams::default(),
        rate: RateHandle::Quadratic { sigma2: 1.0 },
    };
    let est = try_ffi!(deviation::estimate_lambda_n(&exp, n, eps));
    out_write!(lambda_plus, est.lambda_plus);
    out_write!(lambda_minus, est.lambda_minus);
    out_write!(stderr_plus, est.stderr_plus);
    out_write!(stderr_minus, est.stderr_minus);
    BlStatus::Ok
}

// ---------------------------------------------------------------------
// Continued fractions
// ---------------------------------------------------------------------

/// Continued-fraction digits of p/q ∈ (0,1) into a caller buffer.
/// `written` receives the digit count; digits beyond u64 report overflow.
#[no_mangle]
pub extern "C" fn bl_cf_digits_rational(
    p: u64,
    q: u64,
    digits: *mut u64,
    capacity: usize,
    written: *mut usize,
) -> BlStatus {
    if digits.is_null() || written.is_null() {
        return BlStatus::NullPointer;
    }
    let x = try_ffi!(cf::CfNumber::rational_u64(p, q));
    let expansion = try_ffi!(cf::cf_digits(&x, capacity));
    let n = expansion.len();
    for i in 0..n {
        match expansion.digit_u64(i) {
            Some(d) => unsafe { *digits.add(i) = d },
            None => return BlStatus::Overflow,
        }
    }
    unsafe { *written = n };
    BlStatus::Ok
}

/// log qₙ(x)/n for x = p/q (Lévy's constant γ is the a.e. limit).
#[no_mangle]
pub extern "C" fn bl_levy_statistic_rational(p: u64, q: u64, n: usize, out: *mut f64) -> BlStatus {
    let x = try_ffi!(cf::CfNumber::rational_u64(p, q));
    let v = try_ffi!(cf::levy_statistic(&x, n));
    out_write!(out, v);
    BlStatus::Ok
}

// ---------------------------------------------------------------------
// Pressure / thermodynamics
// ---------------------------------------------------------------------

/// Opaque pressure-solver handle.
pub struct BlPressureSolver {
    solver: PressureSolver,
}

/// Create a Gauss-map pressure solver; zero arguments pick the defaults
/// (degree 40, 4000 direct branches). Null on invalid parameters.
#[no_mangle]
pub extern "C" fn bl_pressure_new(degree: usize, branch_direct: usize) -> *mut BlPressureSolver {
    let mut cfg = SolverConfig::default();
    if degree > 0 {
        cfg.degree = degree;
    }
    if branch_direct > 0 {
        cfg.branch_direct = branch_direct;
    }
    match PressureSolver::new(cfg) {
        Ok(solver) => Box::into_raw(Box::new(BlPressureSolver { solver })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Release a pressure solver (null is a no-op).
#[no_mangle]
pub extern "C" fn bl_pressure_free(solver: *mut BlPressureSolver) {
    if !solver.is_null() {
        drop(unsafe { Box::from_raw(solver) });
    }
}

/// P(β) = log of the leading transfer-operator eigenvalue.
#[no_mangle]
pub extern "C" fn bl_pressure_eval(
    solver: *const BlPressureSolver,
    beta: f64,
    out: *mut f64,
) -> BlStatus {
    let Some(handle) = (unsafe { solver.as_ref() }) else {
        return BlStatus::NullPointer;
    };
    let v = try_ffi!(handle.solver.pressure_value(beta));
    out_write!(out, v);
    BlStatus::Ok
}

/// (P′(β), P″(β)) by Richardson central differences.
#[no_mangle]
pub extern "C" fn bl_pressure_derivatives(
    solver: *const BlPressureSolver,
    beta: f64,
    p1: *mut f64,
    p2: *mut f64,
) -> BlStatus {
    let Some(handle) = (unsafe { solver.as_ref() }) else {
        return BlStatus::NullPointer;
    };
    let (d1, d2) = try_ffi!(handle.solver.pressure_derivatives(beta));
    out_write!(p1, d1);
    out_write!(p2, d2);
    BlStatus::Ok
}

/// Lyapunov spectrum point: β(α) and b(α).
#[no_mangle]
pub extern "C" fn bl_spectrum_b(
    solver: *const BlPressureSolver,
    alpha: f64,
    beta_out: *mut f64,
    b_out: *mut f64,
) -> BlStatus {
    let Some(handle) = (unsafe { solver.as_ref() }) else {
        return BlStatus::NullPointer;
    };
    let pt = try_ffi!(handle.solver.spectrum_b(alpha));
    out_write!(beta_out, pt.beta_of_alpha);
    out_write!(b_out, pt.b);
    BlStatus::Ok
}

/// Rate function I(ε) = (ε+2γ)(1 − b(ε+2γ)).
#[no_mangle]
pub extern "C" fn bl_rate_function(
    solver: *const BlPressureSolver,
    eps: f64,
    out: *mut f64,
) -> BlStatus {
    let Some(handle) = (unsafe { solver.as_ref() }) else {
        return BlStatus::NullPointer;
    };
    let v = try_ffi!(handle.solver.rate_function(eps));
    out_write!(out, v);
    BlStatus::Ok
}

/// I″(0) via both routes (direct differencing and −2b″(2γ)γ).
#[no_mangle]
pub extern "C" fn bl_rate_curvature(
    solver: *const BlPressureSolver,
    direct: *mut f64,
    via_spectrum: *mut f64,
) -> BlStatus {
    let Some(handle) = (unsafe { solver.as_ref() }) else {
        return BlStatus::NullPointer;
    };
    let r = try_ffi!(handle.solver.rate_second_derivative_at_0());
    out_write!(direct, r.direct);
    out_write!(via_spectrum, r.via_spectrum);
    BlStatus::Ok
}

/// Status helper kept callable from C for quick smoke checks.
#[no_mangle]
pub extern "C" fn bl_status_is_ok(status: BlStatus) -> c_int {
    (status == BlStatus::Ok) as c_int
}
