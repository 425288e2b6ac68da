//! C ABI over `qml-core`.
//!
//! Conventions:
//! - every fallible call returns a [`QmlStatus`]; results go through out
//!   pointers and are written only on `QML_OK`
//! - handles are opaque and owned by the caller, who releases them with the
//!   matching `*_free`
//! - on failure `qml_last_error` returns a message for the calling thread,
//!   valid until the next failing call on that thread
//! - strings returned by the library are released with `qml_string_free`

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use libc::{c_char, c_double, c_int, size_t};

use qml_core::eikonal::{fold_report, FoldOptions, ReducedSymbol};
use qml_core::flow::{integrate_flow, r_derivatives, Trajectory};
use qml_core::geometry::{check_geometry, GeometryOptions, Region};
use qml_core::quasimode::exponents;
use qml_core::symbol::{builtin_symbol, eval_jet, parse_symbol, PhasePoint, SymbolFn};
use qml_core::QmlError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QmlStatus {
    QmlOk = 0,
    QmlNullPointer = 1,
    QmlInvalidUtf8 = 2,
    QmlSyntax = 3,
    QmlDimension = 4,
    QmlDomain = 5,
    QmlOrder = 6,
    QmlConvergence = 7,
    QmlStepUnderflow = 8,
    QmlInvalidDefiningFunction = 9,
    QmlNormalization = 10,
    QmlNyquist = 11,
    QmlResolution = 12,
    QmlInsufficientSamples = 13,
    QmlNonPositiveSample = 14,
    QmlMemoryBudget = 15,
    QmlUnknownBuiltin = 16,
    QmlInvalidArgument = 17,
    QmlConfig = 18,
    QmlIo = 19,
    QmlBufferTooSmall = 20,
    QmlPanic = 21,
}

impl From<&QmlError> for QmlStatus {
    fn from(e: &QmlError) -> Self {
        match e {
            QmlError::Syntax { .. } => QmlStatus::QmlSyntax,
            QmlError::Dimension(_) => QmlStatus::QmlDimension,
            QmlError::Domain(_) => QmlStatus::QmlDomain,
            QmlError::Order(_) => QmlStatus::QmlOrder,
            QmlError::Convergence(_) => QmlStatus::QmlConvergence,
            QmlError::StepUnderflow { .. } => QmlStatus::QmlStepUnderflow,
            QmlError::InvalidDefiningFunction(_) => QmlStatus::QmlInvalidDefiningFunction,
            QmlError::Normalization(_) => QmlStatus::QmlNormalization,
            QmlError::Nyquist { .. } => QmlStatus::QmlNyquist,
            QmlError::Resolution(_) => QmlStatus::QmlResolution,
            QmlError::InsufficientSamples(_) => QmlStatus::QmlInsufficientSamples,
            QmlError::NonPositiveSample(_) => QmlStatus::QmlNonPositiveSample,
            QmlError::MemoryBudget { .. } => QmlStatus::QmlMemoryBudget,
            QmlError::UnknownBuiltin(_) => QmlStatus::QmlUnknownBuiltin,
            QmlError::InvalidArgument(_) => QmlStatus::QmlInvalidArgument,
            QmlError::Config(_) => QmlStatus::QmlConfig,
            QmlError::Io(_) => QmlStatus::QmlIo,
        }
    }
}

/// A parsed symbol or defining function.
pub struct QmlSymbol(SymbolFn);

/// A sampled bicharacteristic.
pub struct QmlTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(QmlStatus, String);

impl From<QmlError> for Fail {
    fn from(e: QmlError) -> Self {
        Fail(QmlStatus::from(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QmlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QmlStatus::QmlOk,
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            QmlStatus::QmlPanic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(QmlStatus::QmlNullPointer, format!("{} is null", what))
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(QmlStatus::QmlInvalidUtf8, format!("{} is not valid UTF-8", what)))
}

unsafe fn floats<'a>(p: *const c_double, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn symbol<'a>(p: *const QmlSymbol, what: &str) -> Result<&'a SymbolFn, Fail> {
    p.as_ref().map(|s| &s.0).ok_or_else(|| null(what))
}

unsafe fn point(x: *const c_double, xi: *const c_double, n: usize) -> Result<PhasePoint, Fail> {
    Ok(PhasePoint::new(
        floats(x, n, "x")?.to_vec(),
        floats(xi, n, "xi")?.to_vec(),
    ))
}

/// Message for the last failing call on this thread, or null.
#[no_mangle]
pub extern "C" fn qml_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse `text` as a symbol on `T*R^n`.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qml_symbol_parse(text: *const c_char, n: size_t, out: *mut *mut QmlSymbol) -> QmlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let f = parse_symbol(cstr(text, "text")?, n)?;
        *out = Box::into_raw(Box::new(QmlSymbol(f)));
        Ok(())
    })
}

/// Look up a builtin symbol by name (`model-fold`, `flat-elliptic`).
///
/// # Safety
/// `name` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qml_symbol_builtin(name: *const c_char, n: size_t, out: *mut *mut QmlSymbol) -> QmlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let f = builtin_symbol(cstr(name, "name")?, n)?;
        *out = Box::into_raw(Box::new(QmlSymbol(f)));
        Ok(())
    })
}

/// # Safety
/// `sym` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qml_symbol_free(sym: *mut QmlSymbol) {
    if !sym.is_null() {
        drop(Box::from_raw(sym));
    }
}

/// Dimension `n` of the base space, 0 for a null handle.
///
/// # Safety
/// `sym` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qml_symbol_dim(sym: *const QmlSymbol) -> size_t {
    sym.as_ref().map_or(0, |s| s.0.n)
}

/// Number of doubles written by `qml_symbol_jet`: `1 + d + d^2 (+ d^3)`
/// with `d = 2n`, up to the given order.
#[no_mangle]
pub extern "C" fn qml_jet_len(n: size_t, order: c_int) -> size_t {
    let d = 2 * n;
    let mut len = 1;
    let mut term = 1;
    for _ in 0..order.clamp(0, 3) {
        term *= d;
        len += term;
    }
    len
}

/// Derivatives of `sym` at `(x, xi)` up to `order ≤ 3` over the variables
/// `(x1..xn, xi1..xin)`: value, gradient, then full Hessian and third
/// derivative arrays in row-major order.
///
/// # Safety
/// `x` and `xi` must hold `n` doubles; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qml_symbol_jet(
    sym: *const QmlSymbol,
    x: *const c_double,
    xi: *const c_double,
    n: size_t,
    order: c_int,
    out: *mut c_double,
    out_len: size_t,
) -> QmlStatus {
    guard(|| {
        let f = symbol(sym, "sym")?;
        if order < 0 {
            return Err(QmlError::InvalidArgument(format!("negative order {}", order)).into());
        }
        let need = qml_jet_len(n, order);
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len < need {
            return Err(Fail(
                QmlStatus::QmlBufferTooSmall,
                format!("jet needs {} doubles, buffer holds {}", need, out_len),
            ));
        }
        let j = eval_jet(f, &point(x, xi, n)?, order as usize)?;
        let buf = slice::from_raw_parts_mut(out, need);
        buf[0] = j.value;
        let mut k = 1;
        for v in j.gradient.iter().chain(&j.hessian).chain(j.third.iter().flatten()) {
            if k < need {
                buf[k] = *v;
                k += 1;
            }
        }
        Ok(())
    })
}

/// `ṙ` and `r̈` along the flow of `p` through `(x, xi)`.
///
/// # Safety
/// `x` and `xi` must hold `n` doubles; out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qml_rddot(
    p: *const QmlSymbol,
    r: *const QmlSymbol,
    x: *const c_double,
    xi: *const c_double,
    n: size_t,
    out_rdot: *mut c_double,
    out_rddot: *mut c_double,
) -> QmlStatus {
    guard(|| {
        let (p, r) = (symbol(p, "p")?, symbol(r, "r")?);
        if out_rdot.is_null() || out_rddot.is_null() {
            return Err(null("out"));
        }
        let (a, b) = r_derivatives(p, r, &point(x, xi, n)?)?;
        *out_rdot = a;
        *out_rddot = b;
        Ok(())
    })
}

/// `δ(n, p)` and `δ̃(n, p)`; pass `p = INFINITY` for `p = ∞`.
/// `*has_delta_tilde` is 0 where `δ̃` is not defined.
///
/// # Safety
/// Out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qml_exponents(
    n: size_t,
    p: c_double,
    out_delta: *mut c_double,
    out_delta_tilde: *mut c_double,
    has_delta_tilde: *mut c_int,
) -> QmlStatus {
    guard(|| {
        if out_delta.is_null() || out_delta_tilde.is_null() || has_delta_tilde.is_null() {
            return Err(null("out"));
        }
        let e = exponents(n, p)?;
        *out_delta = e.delta;
        *out_delta_tilde = e.delta_tilde.unwrap_or(f64::NAN);
        *has_delta_tilde = e.delta_tilde.is_some() as c_int;
        Ok(())
    })
}

/// Integrate the Hamiltonian flow of `p` from `(x, xi)` at `s = s0` to
/// `s1`, sampled at `samples` equally spaced parameters.
///
/// # Safety
/// `x` and `xi` must hold `n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qml_flow(
    p: *const QmlSymbol,
    x: *const c_double,
    xi: *const c_double,
    n: size_t,
    s0: c_double,
    s1: c_double,
    samples: size_t,
    tol: c_double,
    out: *mut *mut QmlTrajectory,
) -> QmlStatus {
    guard(|| {
        let p = symbol(p, "p")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = integrate_flow(p, &point(x, xi, n)?, (s0, s1), tol, samples)?;
        *out = Box::into_raw(Box::new(QmlTrajectory(t)));
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qml_trajectory_len(t: *const QmlTrajectory) -> size_t {
    t.as_ref().map_or(0, |t| t.0.samples.len())
}

/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qml_trajectory_max_drift(t: *const QmlTrajectory) -> c_double {
    t.as_ref().map_or(f64::NAN, |t| t.0.max_drift)
}

/// Sample `k`: flow parameter, point (`n` doubles each for `x` and `xi`)
/// and drift of `p` from its initial value.
///
/// # Safety
/// `x` and `xi` must have room for `n` doubles; other out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn qml_trajectory_sample(
    t: *const QmlTrajectory,
    k: size_t,
    out_s: *mut c_double,
    out_x: *mut c_double,
    out_xi: *mut c_double,
    out_drift: *mut c_double,
) -> QmlStatus {
    guard(|| {
        let t = t.as_ref().map(|t| &t.0).ok_or_else(|| null("t"))?;
        if out_s.is_null() || out_x.is_null() || out_xi.is_null() || out_drift.is_null() {
            return Err(null("out"));
        }
        let s = t.samples.get(k).ok_or_else(|| {
            Fail(
                QmlStatus::QmlInvalidArgument,
                format!("sample {} out of range (len {})", k, t.samples.len()),
            )
        })?;
        *out_s = s.s;
        slice::from_raw_parts_mut(out_x, t.n).copy_from_slice(&s.point.x);
        slice::from_raw_parts_mut(out_xi, t.n).copy_from_slice(&s.point.xi);
        *out_drift = s.drift;
        Ok(())
    })
}

/// # Safety
/// `t` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qml_trajectory_free(t: *mut QmlTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

fn json_out(v: &impl serde::Serialize, out: *mut *mut c_char) -> Result<(), Fail> {
    let s = serde_json::to_string(v).map_err(|e| Fail(QmlStatus::QmlIo, e.to_string()))?;
    let c = CString::new(s).map_err(|e| Fail(QmlStatus::QmlIo, e.to_string()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Geometry report (JSON) for `p` and hypersurface `r` over the box
/// `[-x_half, x_half]^n × [-xi_half, xi_half]^n` with `samples` points
/// per axis.
///
/// # Safety
/// Handles must be live; `out` must be valid. Free the result with
/// `qml_string_free`.
#[no_mangle]
pub unsafe extern "C" fn qml_geometry_report_json(
    p: *const QmlSymbol,
    r: *const QmlSymbol,
    x_half: c_double,
    xi_half: c_double,
    samples: size_t,
    seed: u64,
    out: *mut *mut c_char,
) -> QmlStatus {
    guard(|| {
        let (p, r) = (symbol(p, "p")?, symbol(r, "r")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let region = Region::cube(p.n, x_half, xi_half, samples);
        let opts = GeometryOptions {
            seed,
            ..Default::default()
        };
        json_out(&check_geometry(p, r, &region, &opts)?, out)
    })
}

/// Fold report (JSON) at `(x, xi)` for the reduced symbol solved from
/// `p = 0`; `r` may be null.
///
/// # Safety
/// `x` and `xi` must hold `n` doubles; `out` must be valid. Free the result
/// with `qml_string_free`.
#[no_mangle]
pub unsafe extern "C" fn qml_fold_report_json(
    p: *const QmlSymbol,
    r: *const QmlSymbol,
    x: *const c_double,
    xi: *const c_double,
    n: size_t,
    out: *mut *mut c_char,
) -> QmlStatus {
    guard(|| {
        let p = symbol(p, "p")?;
        let r = r.as_ref().map(|s| &s.0);
        if out.is_null() {
            return Err(null("out"));
        }
        let pt = point(x, xi, n)?;
        let a = ReducedSymbol::Implicit {
            p: p.clone(),
            tau_seed: pt.xi[0],
        };
        let rep = fold_report(&a, &pt.x, &pt.xi[1..], r, &FoldOptions::default())?;
        json_out(&rep, out)
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qml_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
