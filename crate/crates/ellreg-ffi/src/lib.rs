//! C ABI for the ellreg engine.
//!
//! Contexts are opaque handles; every function returns an [`ErStatus`] code
//! and writes results through out-pointers. String results are allocated by
//! Rust and must be released with [`ellreg_string_free`]. The most recent
//! error message is available per thread via [`ellreg_last_error_message`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};

use num_complex::Complex64;

use ellreg::expr::{parse, render_expr};
use ellreg::kernel::ModularContext;
use ellreg::pv::{pv_single_step, PvOptions};
use ellreg::regint::{integrate_all, integrate_once};
use ellreg::Error;

/// A complex number crossing the C boundary.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct ErComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ErComplex {
    fn from(z: Complex64) -> Self {
        ErComplex { re: z.re, im: z.im }
    }
}

impl From<ErComplex> for Complex64 {
    fn from(z: ErComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// Status codes returned by every API call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ErStatus {
    Ok = 0,
    InvalidArgument = 1,
    ParseError = 2,
    PoleError = 3,
    NonConvergence = 4,
    CapExceeded = 5,
    InternalError = 6,
}

/// Opaque handle around a modular context.
pub struct ErContext {
    ctx: ModularContext,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ErStatus {
    match e {
        Error::SyntaxError { .. } | Error::UnknownSymbol(_) | Error::SelfDifference(_) => {
            ErStatus::ParseError
        }
        Error::PoleHit { .. } | Error::PoleAtLatticePoint(_) => ErStatus::PoleError,
        Error::NonConvergence(_) | Error::PoleOnBoundary => ErStatus::NonConvergence,
        Error::JetCapExceeded { .. } | Error::BeyondTruncation { .. } => ErStatus::CapExceeded,
        Error::NonConstantResult(_) | Error::TruncationUnderflow => ErStatus::InternalError,
        _ => ErStatus::InvalidArgument,
    }
}

fn fail(e: Error) -> ErStatus {
    let s = status_of(&e);
    set_error(&e.to_string());
    s
}

fn invalid(msg: &str) -> ErStatus {
    set_error(msg);
    ErStatus::InvalidArgument
}

/// # Safety
/// `s` must be a valid NUL-terminated string pointer.
unsafe fn cstr<'a>(s: *const c_char) -> Option<&'a str> {
    if s.is_null() {
        return None;
    }
    CStr::from_ptr(s).to_str().ok()
}

/// Message of the most recent error on this thread (valid until the next
/// failing call on the same thread).
#[no_mangle]
pub extern "C" fn ellreg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ellreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a modular context. `series_cutoff = 0` picks the automatic
/// cutoff; `jet_cap = 0` uses the default cap.
///
/// # Safety
/// `out` must be a valid pointer; on `Ok` it receives a handle that must be
/// released with [`ellreg_context_free`].
#[no_mangle]
pub unsafe extern "C" fn ellreg_context_new(
    tau: ErComplex,
    series_cutoff: usize,
    jet_cap: u32,
    out: *mut *mut ErContext,
) -> ErStatus {
    if out.is_null() {
        return invalid("out pointer is null");
    }
    let cutoff = if series_cutoff == 0 {
        None
    } else {
        Some(series_cutoff)
    };
    let cap = if jet_cap == 0 {
        ellreg::DEFAULT_JET_CAP
    } else {
        jet_cap
    };
    match ModularContext::new(tau.into(), cutoff, cap) {
        Ok(ctx) => {
            *out = Box::into_raw(Box::new(ErContext { ctx }));
            ErStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Releases a context handle. A null pointer is a no-op.
///
/// # Safety
/// `ctx` must be a handle from [`ellreg_context_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ellreg_context_free(ctx: *mut ErContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Looks up a named constant (`g2`, `g3`, `eta1`, `eta1hat`, `E2`, ...).
///
/// # Safety
/// `ctx`, `name` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ellreg_constant(
    ctx: *const ErContext,
    name: *const c_char,
    out: *mut ErComplex,
) -> ErStatus {
    let Some(ctx) = ctx.as_ref() else {
        return invalid("context is null");
    };
    let Some(name) = cstr(name) else {
        return invalid("name is null or not UTF-8");
    };
    if out.is_null() {
        return invalid("out pointer is null");
    }
    match ctx.ctx.constants().iter().find(|(n, _)| *n == name) {
        Some((_, v)) => {
            *out = (*v).into();
            ErStatus::Ok
        }
        None => invalid(&format!("unknown constant `{name}`")),
    }
}

/// Iterated regularized integral of a DSL integrand. `order`/`order_len`
/// give the integration order; pass `order_len = 0` for the default
/// ascending order.
///
/// # Safety
/// `ctx`, `expr` and `out` must be valid; `order` must point to `order_len`
/// entries when `order_len > 0`.
#[no_mangle]
pub unsafe extern "C" fn ellreg_integrate(
    ctx: *const ErContext,
    expr: *const c_char,
    order: *const u32,
    order_len: usize,
    out: *mut ErComplex,
) -> ErStatus {
    let Some(ctx) = ctx.as_ref() else {
        return invalid("context is null");
    };
    let Some(text) = cstr(expr) else {
        return invalid("expr is null or not UTF-8");
    };
    if out.is_null() {
        return invalid("out pointer is null");
    }
    let f = match parse(text) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let order_vec: Vec<u32> = if order_len == 0 {
        f.points()
    } else {
        if order.is_null() {
            return invalid("order is null with nonzero length");
        }
        std::slice::from_raw_parts(order, order_len).to_vec()
    };
    let value = integrate_all(&f, &order_vec, ctx.ctx.jet_cap())
        .and_then(|(e, _)| e.evaluate(&ctx.ctx, &BTreeMap::new()));
    match value {
        Ok(v) => {
            *out = v.into();
            ErStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// One integration step in `z_active`; the symbolic result is returned as a
/// DSL string (release it with [`ellreg_string_free`]).
///
/// # Safety
/// `ctx`, `expr` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ellreg_integrate_once(
    ctx: *const ErContext,
    expr: *const c_char,
    active: u32,
    out: *mut *mut c_char,
) -> ErStatus {
    let Some(ctx) = ctx.as_ref() else {
        return invalid("context is null");
    };
    let Some(text) = cstr(expr) else {
        return invalid("expr is null or not UTF-8");
    };
    if out.is_null() {
        return invalid("out pointer is null");
    }
    let result = parse(text).and_then(|f| integrate_once(&f, active, None, ctx.ctx.jet_cap()));
    match result {
        Ok(e) => {
            let rendered = render_expr(&e);
            match CString::new(rendered) {
                Ok(s) => {
                    *out = s.into_raw();
                    ErStatus::Ok
                }
                Err(_) => invalid("rendered expression contains NUL"),
            }
        }
        Err(e) => fail(e),
    }
}

/// Principal-value quadrature of one step. `fixed_points[i]` is assigned the
/// value `fixed_values[i]`.
///
/// # Safety
/// Array pointers must cover `n_fixed` entries; `out_value` and `out_error`
/// must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ellreg_pv_single_step(
    ctx: *const ErContext,
    expr: *const c_char,
    active: u32,
    fixed_points: *const u32,
    fixed_values: *const ErComplex,
    n_fixed: usize,
    out_value: *mut ErComplex,
    out_error: *mut f64,
) -> ErStatus {
    let Some(ctx) = ctx.as_ref() else {
        return invalid("context is null");
    };
    let Some(text) = cstr(expr) else {
        return invalid("expr is null or not UTF-8");
    };
    if out_value.is_null() || out_error.is_null() {
        return invalid("out pointer is null");
    }
    if n_fixed > 0 && (fixed_points.is_null() || fixed_values.is_null()) {
        return invalid("fixed-point arrays are null with nonzero length");
    }
    let mut assign = BTreeMap::new();
    for i in 0..n_fixed {
        let p = *fixed_points.add(i);
        let v = *fixed_values.add(i);
        assign.insert(p, v.into());
    }
    let result = parse(text)
        .and_then(|f| pv_single_step(&f, active, &assign, &ctx.ctx, &PvOptions::default()));
    match result {
        Ok(rep) => {
            *out_value = rep.value.into();
            *out_error = rep.extrapolated_error;
            if rep.converged {
                ErStatus::Ok
            } else {
                set_error("principal value did not converge to tolerance");
                ErStatus::NonConvergence
            }
        }
        Err(e) => fail(e),
    }
}

/// Releases a string allocated by this library. A null pointer is a no-op.
///
/// # Safety
/// `s` must come from an ellreg call and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ellreg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
