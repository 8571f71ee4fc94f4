//! C ABI for the `eqpt` estimators.
//!
//! Matrices and estimates are opaque handles owned by the caller once
//! returned and released with the matching `*_free` function. Every fallible
//! call returns an [`EqptStatus`]; the message of the last failure on the
//! calling thread is available from [`eqpt_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use eqpt::bench::{self, TrialOutcome};
use eqpt::estimators::Method;
use eqpt::linalg::{self, c64, ComplexMatrix};
use eqpt::metrics;
use eqpt::EqptError;

/// Status codes returned by fallible calls.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqptStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    Argument = 3,
    Numerical = 4,
    Parse = 5,
    Io = 6,
    Panic = 7,
}

/// Estimation methods.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqptMethod {
    Eqpt1 = 0,
    Eqpt2 = 1,
    Eqpt3 = 2,
    Eqpt4 = 3,
    Eqpt5 = 4,
    VariantG = 5,
    VariantH = 6,
}

impl From<EqptMethod> for Method {
    fn from(m: EqptMethod) -> Self {
        match m {
            EqptMethod::Eqpt1 => Method::Eqpt1,
            EqptMethod::Eqpt2 => Method::Eqpt2,
            EqptMethod::Eqpt3 => Method::Eqpt3,
            EqptMethod::Eqpt4 => Method::Eqpt4,
            EqptMethod::Eqpt5 => Method::Eqpt5,
            EqptMethod::VariantG => Method::VariantG,
            EqptMethod::VariantH => Method::VariantH,
        }
    }
}

/// Opaque complex square matrix.
pub struct EqptMatrix(ComplexMatrix);

/// Opaque result of one simulated estimation.
pub struct EqptEstimate(TrialOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

fn status_of(e: &EqptError) -> EqptStatus {
    match e {
        EqptError::Dimension(_) => EqptStatus::Dimension,
        EqptError::Argument(_) => EqptStatus::Argument,
        EqptError::Numerical(_) => EqptStatus::Numerical,
        EqptError::Parse { .. } => EqptStatus::Parse,
        EqptError::Io { .. } => EqptStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (EqptStatus, String)>) -> EqptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EqptStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".to_owned());
            EqptStatus::Panic
        }
    }
}

fn core(e: EqptError) -> (EqptStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (EqptStatus, String) {
    (EqptStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eqpt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eqpt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a method name such as `"eqpt3"` or `"variant-g"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqpt_method_from_name(
    name: *const c_char,
    out: *mut EqptMethod,
) -> EqptStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| (EqptStatus::Argument, "method name is not UTF-8".to_owned()))?;
        let method: Method = text.parse().map_err(core)?;
        let index = Method::ALL.iter().position(|m| *m == method).unwrap_or(0);
        *out = FFI_METHODS[index];
        Ok(())
    })
}

const FFI_METHODS: [EqptMethod; 7] = [
    EqptMethod::Eqpt1,
    EqptMethod::Eqpt2,
    EqptMethod::Eqpt3,
    EqptMethod::Eqpt4,
    EqptMethod::Eqpt5,
    EqptMethod::VariantG,
    EqptMethod::VariantH,
];

/// Builds a `dim x dim` matrix from `2 * dim * dim` doubles holding
/// interleaved real and imaginary parts in row-major order.
///
/// # Safety
/// `values` must point to `2 * dim * dim` readable doubles and `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqpt_matrix_new(
    dim: usize,
    values: *const f64,
    out: *mut *mut EqptMatrix,
) -> EqptStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if dim == 0 {
            return Err((
                EqptStatus::Dimension,
                "dimension must be positive".to_owned(),
            ));
        }
        let len = dim
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(2))
            .ok_or((EqptStatus::Dimension, "dimension overflows".to_owned()))?;
        let data = std::slice::from_raw_parts(values, len);
        let m = ComplexMatrix::from_fn(dim, dim, |i, j| {
            let k = 2 * (i * dim + j);
            c64::new(data[k], data[k + 1])
        });
        *out = Box::into_raw(Box::new(EqptMatrix(m)));
        Ok(())
    })
}

/// Haar-random `dim x dim` unitary drawn from `seed`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqpt_matrix_random_unitary(
    dim: usize,
    seed: u64,
    out: *mut *mut EqptMatrix,
) -> EqptStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if dim == 0 {
            return Err((
                EqptStatus::Dimension,
                "dimension must be positive".to_owned(),
            ));
        }
        *out = Box::into_raw(Box::new(EqptMatrix(linalg::random_unitary(dim, seed))));
        Ok(())
    })
}

/// Dimension of a matrix, or 0 for null.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eqpt_matrix_dim(m: *const EqptMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.nrows())
}

/// Reads entry `(row, col)`.
///
/// # Safety
/// `m` must be a live handle; `re` and `im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn eqpt_matrix_get(
    m: *const EqptMatrix,
    row: usize,
    col: usize,
    re: *mut f64,
    im: *mut f64,
) -> EqptStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        if re.is_null() || im.is_null() {
            return Err(null("output"));
        }
        if row >= m.0.nrows() || col >= m.0.ncols() {
            return Err((
                EqptStatus::Dimension,
                format!(
                    "entry ({row}, {col}) outside a {}x{} matrix",
                    m.0.nrows(),
                    m.0.ncols()
                ),
            ));
        }
        let z = m.0[(row, col)];
        *re = z.re;
        *im = z.im;
        Ok(())
    })
}

/// Releases a matrix. Null is ignored.
///
/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eqpt_matrix_free(m: *mut EqptMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Phase-blind normalized RMSE between two matrices of equal shape.
///
/// # Safety
/// `a` and `b` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqpt_nrmse(
    a: *const EqptMatrix,
    b: *const EqptMatrix,
    out: *mut f64,
) -> EqptStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = metrics::nrmse(a.0.as_ref(), b.0.as_ref()).map_err(core)?;
        Ok(())
    })
}

/// Simulates one estimation of a random `2^qubits` process.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqpt_run_trial(
    method: EqptMethod,
    qubits: u32,
    width: f64,
    seed: u64,
    out: *mut *mut EqptEstimate,
) -> EqptStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let outcome =
            bench::run_trial_detailed(method.into(), qubits, width, seed).map_err(core)?;
        *out = Box::into_raw(Box::new(EqptEstimate(outcome)));
        Ok(())
    })
}

/// Simulates one estimation of a given process; `seed` drives the noise.
///
/// # Safety
/// `unitary` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqpt_simulate(
    method: EqptMethod,
    unitary: *const EqptMatrix,
    width: f64,
    seed: u64,
    out: *mut *mut EqptEstimate,
) -> EqptStatus {
    guard(|| {
        let unitary = unitary.as_ref().ok_or_else(|| null("unitary"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let outcome =
            bench::simulate(method.into(), unitary.0.clone(), width, seed).map_err(core)?;
        *out = Box::into_raw(Box::new(EqptEstimate(outcome)));
        Ok(())
    })
}

/// NRMSE of an estimate against its true process, or NaN for null.
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eqpt_estimate_nrmse(e: *const EqptEstimate) -> f64 {
    e.as_ref().map_or(f64::NAN, |e| e.0.record.nrmse)
}

/// `||Û^H Û - I||_F` of an estimate, or NaN for null.
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eqpt_estimate_unitarity_defect(e: *const EqptEstimate) -> f64 {
    e.as_ref()
        .map_or(f64::NAN, |e| e.0.record.diagnostics.unitarity_defect)
}

/// Estimator wall time in seconds, or NaN for null.
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eqpt_estimate_wall_time(e: *const EqptEstimate) -> f64 {
    e.as_ref().map_or(f64::NAN, |e| e.0.record.wall_time_s)
}

/// Copies the estimated matrix into a new handle.
///
/// # Safety
/// `e` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqpt_estimate_matrix(
    e: *const EqptEstimate,
    out: *mut *mut EqptMatrix,
) -> EqptStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("estimate"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(EqptMatrix(e.0.estimate.matrix.clone())));
        Ok(())
    })
}

/// Copies the true process into a new handle.
///
/// # Safety
/// `e` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eqpt_estimate_unitary(
    e: *const EqptEstimate,
    out: *mut *mut EqptMatrix,
) -> EqptStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("estimate"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(EqptMatrix(e.0.unitary.clone())));
        Ok(())
    })
}

/// Releases an estimate. Null is ignored.
///
/// # Safety
/// `e` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eqpt_estimate_free(e: *mut EqptEstimate) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}
