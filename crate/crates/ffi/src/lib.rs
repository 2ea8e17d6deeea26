//! C ABI over `csa-core`.
//!
//! Objects cross the boundary as opaque handles created by `csa_*` functions
//! and released by the matching `*_free`. Every fallible call returns a
//! [`CsaStatus`]; on failure a message for the calling thread is available
//! from [`csa_last_error`]. Panics never unwind into C: they are reported as
//! `CSA_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use csa_core::coverage::DEFAULT_RESOLUTION_FACTOR;
use csa_core::estimator::{confidence_intervals, fit_mle, EstimatorError, Existence, FitOptions, MleResult};
use csa_core::geometry::Domain;
use csa_core::io::{read_sequence, write_sequence};
use csa_core::likelihood::log_likelihood;
use csa_core::params::{BetaVector, CsaParams};
use csa_core::simulator::{simulate, PointSequence, Stop};
use csa_core::statistics::{replay, Trajectory};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    /// The data are inconsistent with the requested model (for example an
    /// insertion count above the model order).
    Data = 5,
    /// Newton iteration did not converge or the information is singular.
    NonConvergence = 6,
    /// The likelihood has no positive finite maximizer.
    NoPositiveMle = 7,
    /// The buffer passed in is too small; nothing was written.
    BufferTooSmall = 8,
    Panic = 9,
}

/// Accepted point sequence.
pub struct CsaSequence(PointSequence);

/// Replayed sufficient statistics of a sequence.
pub struct CsaTrajectory(Trajectory);

/// Maximum-likelihood fit.
pub struct CsaFit(MleResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let s = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(status: CsaStatus, msg: impl std::fmt::Display) -> CsaStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> CsaStatus) -> CsaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(CsaStatus::Panic, "internal panic"),
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize) -> Option<&'a [T]> {
    if n == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, n))
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, CsaStatus> {
    if p.is_null() {
        return Err(fail(CsaStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(CsaStatus::InvalidArgument, "path is not UTF-8"))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message describing the last failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn csa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn csa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Simulates a sequence in a `dim`-dimensional cube of volume `scale`.
/// `beta` holds `beta_1..beta_N` (`n_beta` may be 0 for the hard-core model).
/// `count == 0` runs until jamming.
///
/// # Safety
/// `beta` must point to `n_beta` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csa_simulate(
    radius: f64,
    beta: *const f64,
    n_beta: usize,
    dim: usize,
    scale: f64,
    count: usize,
    seed: u64,
    out: *mut *mut CsaSequence,
) -> CsaStatus {
    guard(|| {
        if out.is_null() {
            return fail(CsaStatus::NullPointer, "out is null");
        }
        let Some(b) = slice(beta, n_beta) else {
            return fail(CsaStatus::NullPointer, "beta is null");
        };
        let params = match Domain::new(dim, scale)
            .map_err(|e| e.to_string())
            .and_then(|d| CsaParams::new(radius, b.to_vec(), d).map_err(|e| e.to_string()))
        {
            Ok(p) => p,
            Err(e) => return fail(CsaStatus::InvalidArgument, e),
        };
        let stop = if count == 0 { Stop::UntilJamming } else { Stop::Count(count) };
        match simulate(&params, stop, seed) {
            Ok(s) => {
                put(out, CsaSequence(s));
                CsaStatus::Ok
            }
            Err(e) => fail(CsaStatus::InvalidArgument, e),
        }
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csa_sequence_read(path: *const c_char, out: *mut *mut CsaSequence) -> CsaStatus {
    guard(|| {
        if out.is_null() {
            return fail(CsaStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match read_sequence(&path) {
            Ok(s) => {
                put(out, CsaSequence(s));
                CsaStatus::Ok
            }
            Err(e @ csa_core::io::IoError::Io { .. }) => fail(CsaStatus::Io, e),
            Err(e) => fail(CsaStatus::Parse, e),
        }
    })
}

/// # Safety
/// `seq` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn csa_sequence_write(seq: *const CsaSequence, path: *const c_char) -> CsaStatus {
    guard(|| {
        let Some(seq) = seq.as_ref() else {
            return fail(CsaStatus::NullPointer, "sequence is null");
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match write_sequence(&path, &seq.0) {
            Ok(()) => CsaStatus::Ok,
            Err(e) => fail(CsaStatus::Io, e),
        }
    })
}

/// Number of points; 0 for a null handle.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_sequence_len(seq: *const CsaSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.len())
}

/// Dimension of the domain; 0 for a null handle.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_sequence_dim(seq: *const CsaSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.domain.dim())
}

/// Whether the run ended because no admissible area was left.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_sequence_jammed(seq: *const CsaSequence) -> bool {
    seq.as_ref().is_some_and(|s| s.0.jammed)
}

/// Copies the coordinates, point-major, into `buf` of `buf_len` doubles
/// (at least `len * dim`).
///
/// # Safety
/// `seq` must be a live handle and `buf` must hold `buf_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csa_sequence_coords(seq: *const CsaSequence, buf: *mut f64, buf_len: usize) -> CsaStatus {
    guard(|| {
        let Some(seq) = seq.as_ref() else {
            return fail(CsaStatus::NullPointer, "sequence is null");
        };
        let need = seq.0.len() * seq.0.domain.dim();
        if buf_len < need {
            return fail(CsaStatus::BufferTooSmall, format!("need {need} doubles, got {buf_len}"));
        }
        if need > 0 && buf.is_null() {
            return fail(CsaStatus::NullPointer, "buffer is null");
        }
        let mut i = 0;
        for p in &seq.0.points {
            for &c in p.coords() {
                *buf.add(i) = c;
                i += 1;
            }
        }
        CsaStatus::Ok
    })
}

/// # Safety
/// `seq` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csa_sequence_free(seq: *mut CsaSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Replays `seq` at model order `order` with grid edge `h` (`h <= 0` selects
/// `R/50`).
///
/// # Safety
/// `seq` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csa_replay(
    seq: *const CsaSequence,
    order: usize,
    h: f64,
    out: *mut *mut CsaTrajectory,
) -> CsaStatus {
    guard(|| {
        let Some(seq) = seq.as_ref() else {
            return fail(CsaStatus::NullPointer, "sequence is null");
        };
        if out.is_null() {
            return fail(CsaStatus::NullPointer, "out is null");
        }
        let h = if h > 0.0 { h } else { seq.0.radius / DEFAULT_RESOLUTION_FACTOR };
        match replay(&seq.0, order, h) {
            Ok(t) => {
                put(out, CsaTrajectory(t));
                CsaStatus::Ok
            }
            Err(e) => fail(CsaStatus::Data, e),
        }
    })
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_trajectory_len(traj: *const CsaTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_trajectory_order(traj: *const CsaTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.order())
}

/// Copies `t_0..t_N` into `buf` (at least `order + 1` entries).
///
/// # Safety
/// `traj` must be a live handle and `buf` must hold `buf_len` entries.
#[no_mangle]
pub unsafe extern "C" fn csa_trajectory_t(traj: *const CsaTrajectory, buf: *mut u64, buf_len: usize) -> CsaStatus {
    guard(|| {
        let Some(traj) = traj.as_ref() else {
            return fail(CsaStatus::NullPointer, "trajectory is null");
        };
        let t = traj.0.t();
        if buf_len < t.len() {
            return fail(CsaStatus::BufferTooSmall, format!("need {} entries, got {buf_len}", t.len()));
        }
        if buf.is_null() {
            return fail(CsaStatus::NullPointer, "buffer is null");
        }
        ptr::copy_nonoverlapping(t.as_ptr(), buf, t.len());
        CsaStatus::Ok
    })
}

/// Log-likelihood at `beta_1..beta_N`; `-inf` is a valid result.
///
/// # Safety
/// `traj` must be a live handle, `beta` must hold `n_beta` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn csa_log_likelihood(
    traj: *const CsaTrajectory,
    beta: *const f64,
    n_beta: usize,
    out: *mut f64,
) -> CsaStatus {
    guard(|| {
        let (Some(traj), Some(b)) = (traj.as_ref(), slice(beta, n_beta)) else {
            return fail(CsaStatus::NullPointer, "null argument");
        };
        if out.is_null() {
            return fail(CsaStatus::NullPointer, "out is null");
        }
        let beta = match BetaVector::new(b.to_vec()) {
            Ok(b) => b,
            Err(e) => return fail(CsaStatus::InvalidArgument, e),
        };
        match log_likelihood(&traj.0, &beta) {
            Ok(v) => {
                *out = v.value();
                CsaStatus::Ok
            }
            Err(e) => fail(CsaStatus::InvalidArgument, e),
        }
    })
}

/// Fits the weights. On `CSA_STATUS_NO_POSITIVE_MLE` or
/// `CSA_STATUS_NON_CONVERGENCE` the handle is still produced and holds the
/// last iterate.
///
/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csa_fit(traj: *const CsaTrajectory, out: *mut *mut CsaFit) -> CsaStatus {
    guard(|| {
        let Some(traj) = traj.as_ref() else {
            return fail(CsaStatus::NullPointer, "trajectory is null");
        };
        if out.is_null() {
            return fail(CsaStatus::NullPointer, "out is null");
        }
        let result = match fit_mle(&traj.0, &FitOptions::default()) {
            Ok(r) => r,
            Err(EstimatorError::NonConvergence { last }) => {
                put(out, CsaFit(*last));
                return fail(CsaStatus::NonConvergence, "Newton iteration did not converge");
            }
            Err(e) => return fail(CsaStatus::NonConvergence, e),
        };
        let status = match result.existence {
            Existence::Interior if result.converged => CsaStatus::Ok,
            Existence::Interior => fail(CsaStatus::NonConvergence, "information is not positive definite"),
            Existence::BoundaryZero(j) | Existence::Unidentified(j) | Existence::Divergent(j) => {
                fail(CsaStatus::NoPositiveMle, format!("no positive MLE for beta_{j}"))
            }
        };
        put(out, CsaFit(result));
        status
    })
}

/// Copies `beta_hat_1..beta_hat_N` into `buf`.
///
/// # Safety
/// `fit` must be a live handle and `buf` must hold `buf_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csa_fit_beta(fit: *const CsaFit, buf: *mut f64, buf_len: usize) -> CsaStatus {
    guard(|| {
        let Some(fit) = fit.as_ref() else {
            return fail(CsaStatus::NullPointer, "fit is null");
        };
        let b = fit.0.beta_hat.as_slice();
        if buf_len < b.len() {
            return fail(CsaStatus::BufferTooSmall, format!("need {} doubles, got {buf_len}", b.len()));
        }
        if !b.is_empty() {
            if buf.is_null() {
                return fail(CsaStatus::NullPointer, "buffer is null");
            }
            ptr::copy_nonoverlapping(b.as_ptr(), buf, b.len());
        }
        CsaStatus::Ok
    })
}

/// Whether the fit converged to an interior maximizer.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_fit_converged(fit: *const CsaFit) -> bool {
    fit.as_ref()
        .is_some_and(|f| f.0.converged && f.0.existence == Existence::Interior)
}

/// Normal intervals at `level`; `lower` and `upper` must each hold `buf_len`
/// doubles, at least the model order.
///
/// # Safety
/// `fit` must be a live handle and both buffers must hold `buf_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csa_fit_intervals(
    fit: *const CsaFit,
    level: f64,
    lower: *mut f64,
    upper: *mut f64,
    buf_len: usize,
) -> CsaStatus {
    guard(|| {
        let Some(fit) = fit.as_ref() else {
            return fail(CsaStatus::NullPointer, "fit is null");
        };
        let n = fit.0.beta_hat.order();
        if buf_len < n {
            return fail(CsaStatus::BufferTooSmall, format!("need {n} doubles, got {buf_len}"));
        }
        if n > 0 && (lower.is_null() || upper.is_null()) {
            return fail(CsaStatus::NullPointer, "buffer is null");
        }
        let ci = match confidence_intervals(&fit.0, level) {
            Ok(c) => c,
            Err(e @ EstimatorError::BadLevel(_)) => return fail(CsaStatus::InvalidArgument, e),
            Err(e) => return fail(CsaStatus::NonConvergence, e),
        };
        ptr::copy_nonoverlapping(ci.lower.as_ptr(), lower, n);
        ptr::copy_nonoverlapping(ci.upper.as_ptr(), upper, n);
        CsaStatus::Ok
    })
}

/// # Safety
/// `fit` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csa_fit_free(fit: *mut CsaFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csa_trajectory_free(traj: *mut CsaTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}
