//! C interface to hamspray.
//!
//! Models are opaque handles created from JSON (or a built-in catalog name)
//! and released with [`hs_model_free`]. Results come back as heap-allocated
//! JSON strings owned by the caller and released with [`hs_string_free`].
//! Every entry point returns an [`HsStatus`]; on anything other than
//! `HS_STATUS_OK` or `HS_STATUS_CHECK_FAILED`, [`hs_last_error_message`]
//! describes the problem. Handles may be shared between threads only for
//! reading; the sampling setters need exclusive access.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::OnceLock;

use hamspray::catalog;
use hamspray::cli::{self, Format, InputError, Outcome, Suite};
use hamspray::dynamics::{Flow, Method};
use hamspray::model::Model;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    /// The call ran, and the returned report records a failed check.
    CheckFailed = 1,
    InvalidInput = 2,
    NullPointer = 3,
    Internal = 4,
}

pub const HS_SUITE_JACOBI: u32 = 0;
pub const HS_SUITE_SEMISPRAY: u32 = 1;
pub const HS_SUITE_SPRAY: u32 = 2;
pub const HS_SUITE_HOMOTOPY: u32 = 3;
pub const HS_SUITE_PROLONGATION: u32 = 4;

pub const HS_METHOD_RK4: u32 = 0;
pub const HS_METHOD_RK45: u32 = 1;

/// Opaque model handle.
pub struct HsModel {
    model: Model,
    flow: OnceLock<Result<Flow, String>>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Input(String),
    Null(&'static str),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.0)
    }
}

fn guard(body: impl FnOnce() -> Result<HsStatus, Failure>) -> HsStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure::Input(msg))) => {
            set_error(&msg);
            HsStatus::InvalidInput
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer passed as `{what}`"));
            HsStatus::NullPointer
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal error".into());
            set_error(&msg);
            HsStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Input(format!("`{what}` is not valid UTF-8")))
}

unsafe fn model<'a>(p: *const HsModel) -> Result<&'a HsModel, Failure> {
    p.as_ref().ok_or(Failure::Null("model"))
}

unsafe fn floats<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn emit(outcome: Outcome, out: *mut *mut c_char) -> Result<HsStatus, Failure> {
    let c = CString::new(outcome.text).map_err(|_| Failure::Input("output contains a NUL byte".into()))?;
    *out = c.into_raw();
    Ok(if outcome.passed { HsStatus::Ok } else { HsStatus::CheckFailed })
}

fn check_out<T>(out: *mut T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(())
    }
}

fn boxed(model: Model) -> *mut HsModel {
    Box::into_raw(Box::new(HsModel { model, flow: OnceLock::new() }))
}

/// Message for the last failed call on this thread; empty if it succeeded.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a JSON model document into a new handle stored in `*out`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_model_from_json(json: *const c_char, out: *mut *mut HsModel) -> HsStatus {
    guard(|| {
        check_out(out, "out")?;
        let m = Model::from_json(text(json, "json")?).map_err(|e| Failure::Input(e.to_string()))?;
        *out = boxed(m);
        Ok(HsStatus::Ok)
    })
}

/// Loads a built-in example model by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_model_from_catalog(name: *const c_char, out: *mut *mut HsModel) -> HsStatus {
    guard(|| {
        check_out(out, "out")?;
        let f = catalog::by_name(text(name, "name")?).map_err(|e| Failure::Input(e.to_string()))?;
        *out = boxed(Model::from_fixture(&f));
        Ok(HsStatus::Ok)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_model_free(model: *mut HsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Base dimension and fiber rank of the model.
///
/// # Safety
/// `model` must be a live handle; `n` and `r` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn hs_model_dims(model: *const HsModel, n: *mut usize, r: *mut usize) -> HsStatus {
    guard(|| {
        let m = self::model(model)?;
        check_out(n, "n")?;
        check_out(r, "r")?;
        *n = m.model.chart.n();
        *r = m.model.chart.r();
        Ok(HsStatus::Ok)
    })
}

/// Overrides the sampling setup used by zero tests. `trials == 0` or a
/// non-positive `tol` keeps the current value.
///
/// # Safety
/// `model` must be a live handle not in use by another thread.
#[no_mangle]
pub unsafe extern "C" fn hs_model_set_sampling(model: *mut HsModel, trials: usize, tol: f64, seed: u64) -> HsStatus {
    guard(|| {
        let m = model.as_mut().ok_or(Failure::Null("model"))?;
        if trials > 0 {
            m.model.sample.trials = trials;
        }
        if tol > 0.0 {
            m.model.sample.tol = tol;
        }
        m.model.sample.seed = seed;
        Ok(HsStatus::Ok)
    })
}

/// Structure equations, Hessian regularity and closedness, as a JSON report.
///
/// # Safety
/// `model` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_validate(model: *const HsModel, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let m = self::model(model)?;
        check_out(out, "out")?;
        let sampler = m.model.chart.sampler(&m.model.sample).map_err(|e| Failure::Input(e.to_string()))?;
        emit(cli::cmd_validate(&m.model, &sampler)?, out)
    })
}

/// Runs one verification suite (`HS_SUITE_*`) and returns its JSON report.
///
/// # Safety
/// `model` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_check(model: *const HsModel, suite: u32, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let m = self::model(model)?;
        check_out(out, "out")?;
        let which = match suite {
            HS_SUITE_JACOBI => Suite::Jacobi,
            HS_SUITE_SEMISPRAY => Suite::Semispray,
            HS_SUITE_SPRAY => Suite::Spray,
            HS_SUITE_HOMOTOPY => Suite::Homotopy,
            HS_SUITE_PROLONGATION => Suite::Prolongation,
            other => return Err(Failure::Input(format!("unknown suite {other}"))),
        };
        let sampler = m.model.chart.sampler(&m.model.sample).map_err(|e| Failure::Input(e.to_string()))?;
        emit(cli::cmd_check(&m.model, &sampler, which)?, out)
    })
}

/// Bracket coefficients on coordinate functions as JSON.
///
/// # Safety
/// `model` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_bracket_json(model: *const HsModel, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let m = self::model(model)?;
        check_out(out, "out")?;
        emit(cli::cmd_bracket(&m.model)?, out)
    })
}

/// Hamiltonian field of `g` as JSON. `g` may be null (meaning `energy+f`),
/// `energy`, `energy+f`, or an expression in the model's variables.
///
/// # Safety
/// `model` must be a live handle, `g` null or NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_hamiltonian_json(model: *const HsModel, g: *const c_char, out: *mut *mut c_char) -> HsStatus {
    guard(|| {
        let m = self::model(model)?;
        check_out(out, "out")?;
        let g = if g.is_null() { "energy+f" } else { text(g, "g")? };
        emit(cli::cmd_hamiltonian(&m.model, g)?, out)
    })
}

/// Integrates the field of `energy+f` from `(x0, y0)` up to `t_end` and
/// returns the trajectory as JSON. `x0` holds `n` values and `y0` holds `r`.
/// A blow-up yields `HS_STATUS_CHECK_FAILED` with an error document.
///
/// # Safety
/// `x0`/`y0` must point to `n`/`r` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_integrate(
    model: *const HsModel,
    x0: *const f64,
    y0: *const f64,
    t_end: f64,
    h: f64,
    method: u32,
    out: *mut *mut c_char,
) -> HsStatus {
    guard(|| {
        let m = self::model(model)?;
        check_out(out, "out")?;
        let ch = &m.model.chart;
        let x0 = floats(x0, ch.n(), "x0")?;
        let y0 = floats(y0, ch.r(), "y0")?;
        let method = match method {
            HS_METHOD_RK4 => Method::Rk4,
            HS_METHOD_RK45 => Method::Rk45,
            other => return Err(Failure::Input(format!("unknown method {other}"))),
        };
        emit(cli::cmd_integrate(&m.model, x0, y0, t_end, h, method, Format::Json, "energy+f")?, out)
    })
}

/// Evaluates the field of `energy+f` at `point = (x, y)` into `values`.
/// Both arrays have length `n + r`. The field is built on first use and
/// cached in the handle.
///
/// # Safety
/// `point` must hold `len` doubles and `values` room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_eval_field(model: *const HsModel, point: *const f64, values: *mut f64, len: usize) -> HsStatus {
    guard(|| {
        let m = self::model(model)?;
        check_out(values, "values")?;
        let dim = m.model.chart.n() + m.model.chart.r();
        if len != dim {
            return Err(Failure::Input(format!("expected {dim} coordinates, got {len}")));
        }
        let z = floats(point, len, "point")?;
        let flow = m
            .flow
            .get_or_init(|| cli::hamiltonian_flow(&m.model, "energy+f").map(|(f, _)| f).map_err(|e| e.0))
            .as_ref()
            .map_err(|e| Failure::Input(e.clone()))?;
        let v = flow.eval(z, 0.0).map_err(|e| Failure::Input(e.to_string()))?;
        ptr::copy_nonoverlapping(v.as_ptr(), values, len);
        Ok(HsStatus::Ok)
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
