//! C ABI over `dkf`.
//!
//! Every function returns a [`DkfStatus`]. On failure a message is kept per
//! thread and can be read with [`dkf_last_error_message`]. Matrices are
//! row-major `double` arrays. Handles are created by `*_new`/`*_load` and
//! released by the matching `*_free`; passing NULL to a `*_free` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dkf::bench::{normalized_mse, BenchError, FittedFilter};
use dkf::filters::{dkf_update, FilterError, PosteriorPolicy};
use dkf::statespace::{GaussianBelief, LinearGaussianDynamics, StateSpaceError};
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DkfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// A matrix that must be positive definite was not, or a solve failed.
    Numerical = 4,
    Io = 5,
    Format = 6,
    Panic = 7,
}

/// Linear-Gaussian state dynamics `z_t = A z_{t-1} + N(0, Γ)`.
pub struct DkfDynamics(LinearGaussianDynamics);

/// A fitted filter loaded from a model file.
pub struct DkfModel(FittedFilter);

/// Running posterior of one filter over a stream of observations.
pub struct DkfFilter {
    model: FittedFilter,
    belief: GaussianBelief,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

struct Failure(DkfStatus, String);

impl Failure {
    fn new(status: DkfStatus, message: impl Into<String>) -> Self {
        Self(status, message.into())
    }
}

impl From<StateSpaceError> for Failure {
    fn from(e: StateSpaceError) -> Self {
        let status = match e {
            StateSpaceError::DimensionMismatch(_) => DkfStatus::DimensionMismatch,
            StateSpaceError::InvalidArgument(_) => DkfStatus::InvalidArgument,
            StateSpaceError::Io(_) => DkfStatus::Io,
            _ => DkfStatus::Numerical,
        };
        Self(status, e.to_string())
    }
}

impl From<FilterError> for Failure {
    fn from(e: FilterError) -> Self {
        let status = match e {
            FilterError::DimensionMismatch(_) => DkfStatus::DimensionMismatch,
            FilterError::InvalidParameters(_) => DkfStatus::InvalidArgument,
            _ => DkfStatus::Numerical,
        };
        Self(status, e.to_string())
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        let status = match e {
            BenchError::Io(_) => DkfStatus::Io,
            BenchError::Json(_) | BenchError::ModelFormat(_) => DkfStatus::Format,
            BenchError::LengthMismatch { .. } => DkfStatus::DimensionMismatch,
            BenchError::ZeroVariance => DkfStatus::InvalidArgument,
            _ => DkfStatus::Numerical,
        };
        Self(status, e.to_string())
    }
}

/// Runs `body`, mapping errors and panics to a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DkfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            DkfStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {message}"));
            DkfStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::new(DkfStatus::NullPointer, format!("{what} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::new(DkfStatus::NullPointer, format!("{what} is NULL")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(DkfStatus::NullPointer, format!("{what} is NULL")))
}

fn square(data: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, data)
}

fn write_matrix(m: &DMatrix<f64>, out: &mut [f64]) {
    let d = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..d {
            out[i * d + j] = m[(i, j)];
        }
    }
}

fn check_dim(d: usize) -> Result<(), Failure> {
    if d == 0 {
        return Err(Failure::new(DkfStatus::InvalidArgument, "dimension must be positive"));
    }
    Ok(())
}

/// Copies the last error message of this thread into `buffer` (NUL
/// terminated, truncated to `capacity`). Returns the full message length.
///
/// # Safety
/// `buffer` must be NULL or point to `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dkf_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buffer.is_null() && capacity > 0 {
            let n = msg.len().min(capacity - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buffer, n);
            *buffer.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds dynamics from `d×d` matrices `a` and `gamma`. Fails unless `A` is
/// stable and `Γ` is SPD.
///
/// # Safety
/// `a` and `gamma` must point to `d*d` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dkf_dynamics_new(
    a: *const f64,
    gamma: *const f64,
    d: usize,
    out: *mut *mut DkfDynamics,
) -> DkfStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::new(DkfStatus::NullPointer, "out is NULL"));
        }
        check_dim(d)?;
        let a = square(slice(a, d * d, "a")?, d);
        let gamma = square(slice(gamma, d * d, "gamma")?, d);
        let dynamics = LinearGaussianDynamics::new(a, gamma)?;
        *out = Box::into_raw(Box::new(DkfDynamics(dynamics)));
        Ok(())
    })
}

/// # Safety
/// `dynamics` must be NULL or a handle from `dkf_dynamics_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dkf_dynamics_free(dynamics: *mut DkfDynamics) {
    if !dynamics.is_null() {
        drop(Box::from_raw(dynamics));
    }
}

/// # Safety
/// `dynamics` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dkf_dynamics_dim(dynamics: *const DkfDynamics) -> usize {
    dynamics.as_ref().map_or(0, |h| h.0.dim())
}

/// Writes the stationary covariance `S` (`d*d` doubles).
///
/// # Safety
/// `dynamics` must be a live handle; `out` must hold `d*d` doubles.
#[no_mangle]
pub unsafe extern "C" fn dkf_dynamics_stationary_covariance(dynamics: *const DkfDynamics, out: *mut f64) -> DkfStatus {
    guard(|| {
        let h = handle(dynamics, "dynamics")?;
        let d = h.0.dim();
        write_matrix(h.0.stationary_covariance(), slice_mut(out, d * d, "out")?);
        Ok(())
    })
}

/// One exact DKF step from the belief `(mean, cov)` given `f(x)` and `Q(x)`.
/// With `strict` nonzero an invalid posterior is an error; otherwise the
/// prior correction is dropped for that step. Outputs may alias inputs.
///
/// # Safety
/// Vector arguments point to `d` doubles and matrix arguments to `d*d`
/// doubles, where `d` is the dynamics dimension.
#[no_mangle]
pub unsafe extern "C" fn dkf_step_discriminative(
    dynamics: *const DkfDynamics,
    mean: *const f64,
    cov: *const f64,
    f: *const f64,
    q: *const f64,
    strict: i32,
    mean_out: *mut f64,
    cov_out: *mut f64,
) -> DkfStatus {
    guard(|| {
        let h = handle(dynamics, "dynamics")?;
        let d = h.0.dim();
        let belief = GaussianBelief::new(
            DVector::from_column_slice(slice(mean, d, "mean")?),
            square(slice(cov, d * d, "cov")?, d),
        )?;
        let f = DVector::from_column_slice(slice(f, d, "f")?);
        let q = square(slice(q, d * d, "q")?, d);
        let policy = if strict != 0 { PosteriorPolicy::Strict } else { PosteriorPolicy::DropPriorCorrection };
        let update = dkf_update(&belief, &f, &q, &h.0, policy)?;
        slice_mut(mean_out, d, "mean_out")?.copy_from_slice(update.belief.mean().as_slice());
        write_matrix(update.belief.covariance(), slice_mut(cov_out, d * d, "cov_out")?);
        Ok(())
    })
}

/// Loads a model file written by `dkf fit`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dkf_model_load(path: *const c_char, out: *mut *mut DkfModel) -> DkfStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(Failure::new(DkfStatus::NullPointer, "path or out is NULL"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure::new(DkfStatus::InvalidArgument, "path is not UTF-8"))?;
        let model = FittedFilter::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(DkfModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dkf_model_free(model: *mut DkfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dkf_model_state_dim(model: *const DkfModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dynamics().dim())
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dkf_model_observation_dim(model: *const DkfModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.observation_dim())
}

/// Starts a filter at the model's stationary prior `N(0, S)`. The filter
/// keeps its own copy of the model.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dkf_filter_new(model: *const DkfModel, out: *mut *mut DkfFilter) -> DkfStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if out.is_null() {
            return Err(Failure::new(DkfStatus::NullPointer, "out is NULL"));
        }
        let belief = GaussianBelief::stationary_prior(m.0.dynamics());
        *out = Box::into_raw(Box::new(DkfFilter { model: m.0.clone(), belief }));
        Ok(())
    })
}

/// # Safety
/// `filter` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dkf_filter_free(filter: *mut DkfFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// Consumes one observation (`m` doubles) and writes the posterior mean
/// (`d`) and covariance (`d*d`). Either output may be NULL. On error the
/// filter keeps its previous belief.
///
/// # Safety
/// `filter` must be a live handle and pointers must cover the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn dkf_filter_step(
    filter: *mut DkfFilter,
    x: *const f64,
    m: usize,
    mean_out: *mut f64,
    cov_out: *mut f64,
) -> DkfStatus {
    guard(|| {
        let state = filter.as_mut().ok_or_else(|| Failure::new(DkfStatus::NullPointer, "filter is NULL"))?;
        if m != state.model.observation_dim() {
            return Err(Failure::new(
                DkfStatus::DimensionMismatch,
                format!("observation has {m} entries, model expects {}", state.model.observation_dim()),
            ));
        }
        let x = DVector::from_column_slice(slice(x, m, "x")?);
        let run = state.model.run_from(std::slice::from_ref(&x), state.belief.clone())?;
        let belief = run.beliefs.into_iter().next().expect("one step");
        let d = belief.dim();
        if !mean_out.is_null() {
            slice_mut(mean_out, d, "mean_out")?.copy_from_slice(belief.mean().as_slice());
        }
        if !cov_out.is_null() {
            write_matrix(belief.covariance(), slice_mut(cov_out, d * d, "cov_out")?);
        }
        state.belief = belief;
        Ok(())
    })
}

/// Normalized MSE of `n` predictions against `n` truth rows of width `d`
/// (both row-major `n×d`).
///
/// # Safety
/// `predicted` and `truth` must hold `n*d` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dkf_normalized_mse(
    predicted: *const f64,
    truth: *const f64,
    n: usize,
    d: usize,
    out: *mut f64,
) -> DkfStatus {
    guard(|| {
        check_dim(d)?;
        let rows = |p: &[f64]| p.chunks(d).map(DVector::from_column_slice).collect::<Vec<_>>();
        let p = rows(slice(predicted, n * d, "predicted")?);
        let t = rows(slice(truth, n * d, "truth")?);
        let value = normalized_mse(&p, &t)?;
        *out.as_mut().ok_or_else(|| Failure::new(DkfStatus::NullPointer, "out is NULL"))? = value;
        Ok(())
    })
}
