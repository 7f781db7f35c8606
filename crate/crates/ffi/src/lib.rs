//! C interface to the `aspline` library.
//!
//! Fits are returned as opaque `AsplineFit` handles that must be released
//! with `aspline_fit_free`. Every fallible function returns an
//! `AsplineStatus`; the message of the last failure on the calling thread is
//! available from `aspline_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use aspline::basis::{eval_basis, Boundary, KnotVector};
use aspline::fit::{fit_aspline, FitConfig};
use aspline::glm::Family;
use aspline::selection::{Criterion, FitResult};
use aspline::solver::LambdaGrid;
use aspline::Error;

pub const ASPLINE_FAMILY_GAUSSIAN: u32 = 0;
pub const ASPLINE_FAMILY_POISSON: u32 = 1;
pub const ASPLINE_FAMILY_BINOMIAL: u32 = 2;

pub const ASPLINE_CRITERION_AIC: u32 = 0;
pub const ASPLINE_CRITERION_BIC: u32 = 1;
pub const ASPLINE_CRITERION_EBIC0: u32 = 2;

pub const ASPLINE_BOUNDARY_UNIFORM: u32 = 0;
pub const ASPLINE_BOUNDARY_CLAMPED: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsplineStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericalError = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Fit settings. Obtain defaults from `aspline_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AsplineOptions {
    pub degree: usize,
    pub num_knots: usize,
    /// One of the `ASPLINE_FAMILY_*` constants.
    pub family: u32,
    /// One of the `ASPLINE_CRITERION_*` constants.
    pub criterion: u32,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_count: usize,
}

/// Opaque fitted model.
pub struct AsplineFit {
    result: FitResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: AsplineStatus, msg: impl Into<String>) -> AsplineStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> AsplineStatus {
    if e.is_numerical() {
        AsplineStatus::NumericalError
    } else if matches!(e, Error::InvalidArgument(_)) {
        AsplineStatus::InvalidArgument
    } else {
        AsplineStatus::DataError
    }
}

fn guard<F: FnOnce() -> AsplineStatus>(f: F) -> AsplineStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(AsplineStatus::Panic, "internal panic"),
    }
}

/// Message of the last error raised on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn aspline_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn aspline_options_default() -> AsplineOptions {
    let d = FitConfig::default();
    AsplineOptions {
        degree: d.degree,
        num_knots: d.num_knots,
        family: ASPLINE_FAMILY_GAUSSIAN,
        criterion: ASPLINE_CRITERION_EBIC0,
        lambda_min: d.grid.min,
        lambda_max: d.grid.max,
        lambda_count: d.grid.count,
    }
}

fn family_of(code: u32) -> Option<Family> {
    match code {
        ASPLINE_FAMILY_GAUSSIAN => Some(Family::Gaussian),
        ASPLINE_FAMILY_POISSON => Some(Family::Poisson),
        ASPLINE_FAMILY_BINOMIAL => Some(Family::Binomial),
        _ => None,
    }
}

fn criterion_of(code: u32) -> Option<Criterion> {
    match code {
        ASPLINE_CRITERION_AIC => Some(Criterion::Aic),
        ASPLINE_CRITERION_BIC => Some(Criterion::Bic),
        ASPLINE_CRITERION_EBIC0 => Some(Criterion::Ebic0),
        _ => None,
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> &'a [f64] {
    if n == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(p, n)
    }
}

/// Fits an adaptive spline to `n` points.
///
/// `options` may be NULL for the defaults. On success `*out` receives a new
/// handle.
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles and `out` to a writable
/// handle pointer.
#[no_mangle]
pub unsafe extern "C" fn aspline_fit(
    x: *const f64,
    y: *const f64,
    n: usize,
    options: *const AsplineOptions,
    out: *mut *mut AsplineFit,
) -> AsplineStatus {
    guard(|| {
        if out.is_null() || ((x.is_null() || y.is_null()) && n > 0) {
            return fail(AsplineStatus::NullPointer, "null pointer argument");
        }
        *out = ptr::null_mut();
        let opts = if options.is_null() {
            aspline_options_default()
        } else {
            *options
        };
        let (Some(family), Some(criterion)) =
            (family_of(opts.family), criterion_of(opts.criterion))
        else {
            return fail(
                AsplineStatus::InvalidArgument,
                "unknown family or criterion code",
            );
        };
        let cfg = FitConfig {
            degree: opts.degree,
            num_knots: opts.num_knots,
            family,
            criterion,
            grid: LambdaGrid {
                min: opts.lambda_min,
                max: opts.lambda_max,
                count: opts.lambda_count,
            },
            ..FitConfig::default()
        };
        match fit_aspline(slice(x, n), slice(y, n), &cfg) {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(AsplineFit {
                    result: outcome.best,
                }));
                AsplineStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `fit` must come from `aspline_fit` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn aspline_fit_free(fit: *mut AsplineFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

unsafe fn copy_out(
    values: &[f64],
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> AsplineStatus {
    if !len.is_null() {
        *len = values.len();
    }
    if values.len() > capacity {
        return fail(
            AsplineStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, {} needed", values.len()),
        );
    }
    if !values.is_empty() {
        if buf.is_null() {
            return fail(AsplineStatus::NullPointer, "null output buffer");
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    }
    AsplineStatus::Ok
}

/// Copies the selected interior knots into `buf`; `*len` receives their count.
///
/// # Safety
/// `fit` must be a live handle, `buf` must hold `capacity` doubles and `len`
/// may be NULL.
#[no_mangle]
pub unsafe extern "C" fn aspline_fit_knots(
    fit: *const AsplineFit,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> AsplineStatus {
    guard(|| match fit.as_ref() {
        Some(f) => copy_out(&f.result.selected_knots, buf, capacity, len),
        None => fail(AsplineStatus::NullPointer, "null fit handle"),
    })
}

/// Copies the refitted B-spline coefficients (clamped basis on the selected
/// knots) into `buf`.
///
/// # Safety
/// As for `aspline_fit_knots`.
#[no_mangle]
pub unsafe extern "C" fn aspline_fit_coefficients(
    fit: *const AsplineFit,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> AsplineStatus {
    guard(|| match fit.as_ref() {
        Some(f) => copy_out(&f.result.coefficients, buf, capacity, len),
        None => fail(AsplineStatus::NullPointer, "null fit handle"),
    })
}

/// Number of basis functions of the selected model; 0 for NULL.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aspline_fit_model_dim(fit: *const AsplineFit) -> usize {
    fit.as_ref().map_or(0, |f| f.result.model_dim)
}

/// Penalty of the selected model; NaN for NULL.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aspline_fit_lambda(fit: *const AsplineFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.result.lambda)
}

/// Writes the AIC, BIC and EBIC0 of the selected model. Any output pointer may
/// be NULL.
///
/// # Safety
/// `fit` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn aspline_fit_criteria(
    fit: *const AsplineFit,
    aic: *mut f64,
    bic: *mut f64,
    ebic0: *mut f64,
) -> AsplineStatus {
    guard(|| {
        let Some(f) = fit.as_ref() else {
            return fail(AsplineStatus::NullPointer, "null fit handle");
        };
        let c = f.result.criteria;
        for (p, v) in [(aic, c.aic), (bic, c.bic), (ebic0, c.ebic0)] {
            if !p.is_null() {
                *p = v;
            }
        }
        AsplineStatus::Ok
    })
}

/// Evaluates the fitted mean at `n` points of the fit's domain.
///
/// # Safety
/// `fit` must be a live handle, `x` must hold `n` doubles and `out` room for
/// `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn aspline_fit_predict(
    fit: *const AsplineFit,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> AsplineStatus {
    guard(|| {
        let Some(f) = fit.as_ref() else {
            return fail(AsplineStatus::NullPointer, "null fit handle");
        };
        if n > 0 && (x.is_null() || out.is_null()) {
            return fail(AsplineStatus::NullPointer, "null buffer");
        }
        match f.result.predict(slice(x, n)) {
            Ok(v) => copy_out(&v, out, n, ptr::null_mut()),
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Values at `x` of all `degree + num_knots + 1` B-splines on `num_knots`
/// equally spaced interior knots of `[lo, hi]`.
///
/// # Safety
/// `out` must hold `capacity` doubles; `len` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn aspline_basis_eval(
    lo: f64,
    hi: f64,
    num_knots: usize,
    degree: usize,
    boundary: u32,
    x: f64,
    out: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> AsplineStatus {
    guard(|| {
        let boundary = match boundary {
            ASPLINE_BOUNDARY_UNIFORM => Boundary::Uniform,
            ASPLINE_BOUNDARY_CLAMPED => Boundary::Clamped,
            _ => return fail(AsplineStatus::InvalidArgument, "unknown boundary code"),
        };
        let row = KnotVector::equally_spaced(lo, hi, num_knots, degree, boundary)
            .and_then(|kv| eval_basis(&kv, x));
        match row {
            Ok(v) => copy_out(&v, out, capacity, len),
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}
