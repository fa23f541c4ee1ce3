//! C interface to `fracdiff`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every entry point returns an
//! [`FdStatus`]; on failure the message and error code of the most recent
//! failure on the calling thread are available through
//! [`fd_last_error_message`] and [`fd_last_error_code`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use fracdiff::forward::{solve_trace, MultiTermModel, SourceTemporalProfile};
use fracdiff::identify::{estimate_baseline, peel_orders, IdentificationConfig, IdentificationMode, IdentificationResult};
use fracdiff::forward::{ObservationTrace, TraceSource};
use fracdiff::spectral::{dirichlet_laplacian, kappa_match, FieldCoefficients, SpectralOperator};
use fracdiff::special::{ml_eval, MlParams};
use fracdiff::{Error, ErrorCategory};

/// Result of a call. Values 2 to 4 follow the exit codes of the command
/// line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Invalid parameters or input data.
    InvalidInput = 2,
    /// A numerical method failed.
    Numerical = 3,
    /// The data violate a hypothesis of the problem.
    Hypothesis = 4,
    /// The caller's buffer is too short; the required length was reported.
    BufferTooSmall = 5,
    /// Internal panic caught at the boundary.
    Panic = 6,
}

/// Elliptic operator with its retained eigenpairs.
pub struct FdOperator(Arc<SpectralOperator>);

/// Multi-term fractional model bound to an operator.
pub struct FdModel(MultiTermModel);

/// Output of an identification run.
pub struct FdIdentification(IdentificationResult);

struct LastError {
    code: CString,
    message: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn set_last_error(code: &str, message: &str) {
    let clean = |s: &str| CString::new(s.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(LastError { code: clean(code), message: clean(message) }));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> FdStatus {
    match err.category() {
        ErrorCategory::Config => FdStatus::InvalidInput,
        ErrorCategory::Numerical => FdStatus::Numerical,
        ErrorCategory::Hypothesis => FdStatus::Hypothesis,
    }
}

enum Failure {
    Null(&'static str),
    Short(usize),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn guard(body: impl FnOnce() -> Outcome) -> FdStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FdStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_last_error("null_pointer", &format!("argument `{name}` is null"));
            FdStatus::NullPointer
        }
        Ok(Err(Failure::Short(needed))) => {
            set_last_error("buffer_too_small", &format!("buffer must hold {needed} elements"));
            FdStatus::BufferTooSmall
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.code(), &e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error("panic", &msg);
            FdStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> std::result::Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &'static str) -> std::result::Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn get<'a, T>(p: *const T, name: &'static str) -> std::result::Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

fn copy_out(src: &[f64], dst: *mut f64, cap: usize, len_out: *mut usize) -> Outcome {
    if !len_out.is_null() {
        unsafe { *len_out = src.len() };
    }
    if cap < src.len() {
        return Err(Failure::Short(src.len()));
    }
    let dst = unsafe { slice_mut(dst, src.len(), "out")? };
    dst.copy_from_slice(src);
    Ok(())
}

fn store<T>(out: *mut *mut T, value: T) -> Outcome {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(p))));
    }
}

/// Message of the last failure on this thread, or null if the last call
/// succeeded. The string stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn fd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.message.as_ptr()))
}

/// Machine-readable code of the last failure (`"rank_condition"`, ...), or
/// null. Same lifetime as [`fd_last_error_message`].
#[no_mangle]
pub extern "C" fn fd_last_error_code() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.code.as_ptr()))
}

/// Dirichlet Laplacian `-d²/dx²` on `(0, length)` with `n_modes` modes.
///
/// # Safety
/// `out` must be valid for a write of one pointer.
#[no_mangle]
pub unsafe extern "C" fn fd_operator_dirichlet(length: f64, n_modes: usize, out: *mut *mut FdOperator) -> FdStatus {
    guard(|| store(out, FdOperator(Arc::new(dirichlet_laplacian(length, n_modes)?))))
}

/// # Safety
/// `op` must be null or a handle from [`fd_operator_dirichlet`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fd_operator_free(op: *mut FdOperator) {
    release(op)
}

/// Number of retained modes, 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live operator handle.
#[no_mangle]
pub unsafe extern "C" fn fd_operator_mode_count(op: *const FdOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.mode_count())
}

/// Copies the eigenvalues into `out[0..cap]`; `len_out` receives the count.
///
/// # Safety
/// `op` must be a live operator handle, `out` valid for `cap` writes and
/// `len_out` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fd_operator_eigenvalues(
    op: *const FdOperator,
    out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> FdStatus {
    guard(|| copy_out(get(op, "op")?.0.eigenvalues(), out, cap, len_out))
}

/// Model `Σ q_j ∂_t^{α_j} u + L u` with `m` terms; orders strictly
/// decreasing in (0, 1), coefficients positive. The model keeps its own
/// reference to the operator.
///
/// # Safety
/// `op` must be a live operator handle, `orders` and `coeffs` valid for `m`
/// reads and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fd_model_new(
    op: *const FdOperator,
    orders: *const f64,
    coeffs: *const f64,
    m: usize,
    out: *mut *mut FdModel,
) -> FdStatus {
    guard(|| {
        let op = get(op, "op")?;
        let orders = slice(orders, m, "orders")?.to_vec();
        let coeffs = slice(coeffs, m, "coeffs")?.to_vec();
        store(out, FdModel(MultiTermModel::new(orders, coeffs, op.0.clone())?))
    })
}

/// # Safety
/// `model` must be null or a handle from [`fd_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fd_model_free(model: *mut FdModel) {
    release(model)
}

/// `u(x0, t_k)` for initial coefficients `a` and the source
/// `scale · t^mu · f(x)`, both given in the orthonormal eigenbasis
/// (`sqrt(2/length) sin(n π x / length)` for the Dirichlet Laplacian). Coefficient arrays shorter than the mode count
/// are padded with zeros; pass `f_len = 0` for no source.
///
/// # Safety
/// `model` must be a live model handle; `a`, `f` and `times` valid for
/// `a_len`, `f_len` and `n_times` reads; `values` valid for `n_times` writes.
#[no_mangle]
pub unsafe extern "C" fn fd_solve_trace(
    model: *const FdModel,
    a: *const f64,
    a_len: usize,
    f: *const f64,
    f_len: usize,
    mu: f64,
    scale: f64,
    x0: f64,
    times: *const f64,
    n_times: usize,
    values: *mut f64,
) -> FdStatus {
    guard(|| {
        let model = &get(model, "model")?.0;
        let n = model.operator().mode_count();
        let a = FieldCoefficients::from_leading(slice(a, a_len, "a")?, n)?;
        let f = FieldCoefficients::from_leading(slice(f, f_len, "f")?, n)?;
        let temporal =
            if f_len == 0 { SourceTemporalProfile::None } else { SourceTemporalProfile::power_law(mu, scale)? };
        let times = slice(times, n_times, "times")?;
        let out = slice_mut(values, n_times, "values")?;
        let trace = solve_trace(model, &a, &f, &temporal, x0, times)?;
        out.copy_from_slice(&trace.values);
        Ok(())
    })
}

/// Mittag-Leffler function `E_{alpha,beta}(z)` for real `z`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fd_mittag_leffler(alpha: f64, beta: f64, z: f64, out: *mut f64) -> FdStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ml_eval(MlParams::new(alpha, beta)?, z)?;
        Ok(())
    })
}

/// Mode pairs `(n, θ(n))` with `λ_n = kappa λ_θ(n)`, 1-based and
/// interleaved in `pairs[0..2*count]`. `count_out` receives the number of
/// pairs; `BufferTooSmall` is returned when `cap` (in pairs) is short.
///
/// # Safety
/// `op` must be a live operator handle, `pairs` valid for `2*cap` writes
/// and `count_out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fd_kappa_match(
    op: *const FdOperator,
    kappa: f64,
    tol: f64,
    pairs: *mut usize,
    cap: usize,
    count_out: *mut usize,
) -> FdStatus {
    guard(|| {
        let op = &get(op, "op")?.0;
        if count_out.is_null() {
            return Err(Failure::Null("count_out"));
        }
        let tol = if tol > 0.0 { tol } else { op.default_kappa_tol() };
        let matching = kappa_match(op, kappa, tol)?;
        *count_out = matching.pairs.len();
        if cap < matching.pairs.len() {
            return Err(Failure::Short(matching.pairs.len()));
        }
        let dst = slice_mut(pairs, 2 * matching.pairs.len(), "pairs")?;
        for (slot, (n, m)) in dst.chunks_exact_mut(2).zip(&matching.pairs) {
            slot[0] = *n;
            slot[1] = *m;
        }
        Ok(())
    })
}

/// Identifies orders and coefficient ratios from a trace with the staged
/// time-domain fit and default settings. A NaN `mu` selects the
/// homogeneous problem, otherwise a source `~ t^mu` with zero initial
/// value. The baseline `u(x0, 0)` is estimated from the data.
///
/// # Safety
/// `times` and `values` must be valid for `n` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn fd_identify(
    times: *const f64,
    values: *const f64,
    n: usize,
    x0: f64,
    mu: f64,
    out: *mut *mut FdIdentification,
) -> FdStatus {
    guard(|| {
        let times = slice(times, n, "times")?.to_vec();
        let values = slice(values, n, "values")?.to_vec();
        let trace = ObservationTrace::new(x0, times, values, TraceSource::File)?;
        let cfg = IdentificationConfig::default();
        let (mode, baseline) = if mu.is_nan() {
            (IdentificationMode::Homogeneous, estimate_baseline(&trace, &cfg)?)
        } else {
            (IdentificationMode::Source { mu }, 0.0)
        };
        store(out, FdIdentification(peel_orders(&trace, baseline, &cfg, mode)?))
    })
}

/// # Safety
/// `id` must be null or a handle from [`fd_identify`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fd_identification_free(id: *mut FdIdentification) {
    release(id)
}

/// Identified number of terms, 0 for a null handle.
///
/// # Safety
/// `id` must be null or a live identification handle.
#[no_mangle]
pub unsafe extern "C" fn fd_identification_term_count(id: *const FdIdentification) -> usize {
    id.as_ref().map_or(0, |r| r.0.m_hat)
}

/// Identified orders, decreasing.
///
/// # Safety
/// `id` must be a live handle, `out` valid for `cap` writes and `len_out`
/// null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fd_identification_orders(
    id: *const FdIdentification,
    out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> FdStatus {
    guard(|| copy_out(&get(id, "id")?.0.orders_hat, out, cap, len_out))
}

/// Coefficient ratios `q_j / q_1`, first entry 1.
///
/// # Safety
/// As for [`fd_identification_orders`].
#[no_mangle]
pub unsafe extern "C" fn fd_identification_ratios(
    id: *const FdIdentification,
    out: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> FdStatus {
    guard(|| copy_out(&get(id, "id")?.0.coeff_ratios, out, cap, len_out))
}

/// Full result with diagnostics as a JSON string, released with
/// [`fd_string_free`].
///
/// # Safety
/// `id` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fd_identification_json(id: *const FdIdentification, out: *mut *mut c_char) -> FdStatus {
    guard(|| {
        let text = get(id, "id")?.0.to_json()?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = CString::new(text).map_err(|e| Error::InvalidParameter(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    #[test]
    fn null_out_is_reported() {
        let status = unsafe { fd_operator_dirichlet(1.0, 4, ptr::null_mut()) };
        assert_eq!(status, FdStatus::NullPointer);
        let code = unsafe { CStr::from_ptr(fd_last_error_code()) };
        assert_eq!(code.to_str().unwrap(), "null_pointer");
    }

    #[test]
    fn success_clears_error() {
        let mut op = ptr::null_mut();
        unsafe {
            assert_eq!(fd_operator_dirichlet(-1.0, 4, &mut op), FdStatus::InvalidInput);
            assert!(!fd_last_error_message().is_null());
            assert_eq!(fd_operator_dirichlet(1.0, 4, &mut op), FdStatus::Ok);
            assert!(fd_last_error_message().is_null());
            fd_operator_free(op);
        }
    }
}
