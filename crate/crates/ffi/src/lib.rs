//! C ABI over the `ubss` separation library.
//!
//! Estimated matrices live behind an opaque [`UbssEstimate`] handle owned by
//! the caller and released with [`ubss_estimate_free`]. Every fallible call
//! returns a [`UbssStatus`]; the message of the most recent failure on the
//! calling thread is available from [`ubss_last_error_message`].
//!
//! Activity thresholds are relative to the mixture peak, as in the CLI.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use ubss::config::{ExperimentConfig, Settings};
use ubss::matrix_est::{EstimatedMatrix, PeakSelection, Quantum};
use ubss::{pipeline, Error, SignalMatrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UbssStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NoActiveSamples = 4,
    InsufficientColumns = 5,
    DegeneratePair = 6,
    DegenerateSignal = 7,
    BufferTooSmall = 8,
    Io = 9,
    Parse = 10,
    Internal = 11,
}

/// Opaque estimated mixing matrix.
pub struct UbssEstimate {
    inner: EstimatedMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> UbssStatus {
    match err.root() {
        Error::Config(_) | Error::NonFinite { .. } | Error::InactiveSample => UbssStatus::InvalidArgument,
        Error::DimensionMismatch(_) => UbssStatus::DimensionMismatch,
        Error::NoActiveSamples => UbssStatus::NoActiveSamples,
        Error::InsufficientColumns { .. } => UbssStatus::InsufficientColumns,
        Error::DegeneratePair { .. } => UbssStatus::DegeneratePair,
        Error::DegenerateSignal => UbssStatus::DegenerateSignal,
        Error::Io { .. } => UbssStatus::Io,
        Error::Parse { .. } => UbssStatus::Parse,
        Error::AtSample { .. } | Error::Stage { .. } => UbssStatus::Internal,
    }
}

struct Failure(UbssStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: UbssStatus, msg: &str) -> Failure {
    Failure(status, msg.to_owned())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UbssStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UbssStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            UbssStatus::Internal
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(UbssStatus::NullPointer, "null input buffer"));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn two_channels(x1: *const f64, x2: *const f64, len: usize) -> Result<SignalMatrix, Failure> {
    let (a, b) = (input(x1, len)?, input(x2, len)?);
    Ok(SignalMatrix::from_columns(&[a.to_vec(), b.to_vec()])?)
}

fn settings(quantum: f64, activity_eps: f64, peak_fraction: f64) -> Result<Settings, Failure> {
    let mut s = Settings {
        quantum: Quantum::new(quantum)?,
        activity_eps,
        selection: PeakSelection::Fraction(peak_fraction),
    };
    ubss::Overrides::default().apply_settings(&mut s)?;
    Ok(s)
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(fail(UbssStatus::NullPointer, "null path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(UbssStatus::InvalidArgument, "path is not valid UTF-8"))
}

/// Estimates the mixing matrix from two mixture channels of `len` samples.
///
/// # Safety
/// `x1` and `x2` must point to `len` readable doubles; `out` must be a
/// valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn ubss_estimate_mixing(
    x1: *const f64,
    x2: *const f64,
    len: usize,
    quantum: f64,
    activity_eps: f64,
    peak_fraction: f64,
    out: *mut *mut UbssEstimate,
) -> UbssStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(UbssStatus::NullPointer, "null output handle"));
        }
        *out = ptr::null_mut();
        let mixtures = two_channels(x1, x2, len)?;
        let settings = settings(quantum, activity_eps, peak_fraction)?;
        let (_, est) = pipeline::estimate_stage(&mixtures, &settings)?;
        *out = Box::into_raw(Box::new(UbssEstimate { inner: est }));
        Ok(())
    })
}

/// Builds an estimate handle from known column ratios.
///
/// # Safety
/// `ratios` must point to `n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ubss_estimate_from_ratios(
    ratios: *const f64,
    n: usize,
    out: *mut *mut UbssEstimate,
) -> UbssStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(UbssStatus::NullPointer, "null output handle"));
        }
        *out = ptr::null_mut();
        let est = EstimatedMatrix::new(input(ratios, n)?.to_vec())?;
        *out = Box::into_raw(Box::new(UbssEstimate { inner: est }));
        Ok(())
    })
}

/// Number of estimated sources, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ubss_estimate_count(handle: *const UbssEstimate) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.n_sources())
}

/// Copies the estimated ratios (heaviest mode first) into `buf`.
///
/// # Safety
/// `handle` must be live; `buf` must hold `cap` doubles; `written` may be null.
#[no_mangle]
pub unsafe extern "C" fn ubss_estimate_ratios(
    handle: *const UbssEstimate,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> UbssStatus {
    guard(|| {
        let h = handle
            .as_ref()
            .ok_or_else(|| fail(UbssStatus::NullPointer, "null handle"))?;
        let ratios = h.inner.ratios();
        if !written.is_null() {
            *written = ratios.len();
        }
        if cap < ratios.len() {
            return Err(fail(UbssStatus::BufferTooSmall, "ratio buffer too small"));
        }
        if buf.is_null() {
            return Err(fail(UbssStatus::NullPointer, "null ratio buffer"));
        }
        slice::from_raw_parts_mut(buf, ratios.len()).copy_from_slice(ratios);
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ubss_estimate_free(handle: *mut UbssEstimate) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Separates `len` samples into `out`, row-major `len × count` where
/// `count = ubss_estimate_count(handle)`.
///
/// # Safety
/// Input pointers must hold `len` doubles; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ubss_separate(
    handle: *const UbssEstimate,
    x1: *const f64,
    x2: *const f64,
    len: usize,
    activity_eps: f64,
    out: *mut f64,
    out_len: usize,
) -> UbssStatus {
    guard(|| {
        let h = handle
            .as_ref()
            .ok_or_else(|| fail(UbssStatus::NullPointer, "null handle"))?;
        let need = len * h.inner.n_sources();
        if out_len < need {
            return Err(fail(UbssStatus::BufferTooSmall, "output buffer too small"));
        }
        if out.is_null() {
            return Err(fail(UbssStatus::NullPointer, "null output buffer"));
        }
        let mixtures = two_channels(x1, x2, len)?;
        let settings = Settings {
            activity_eps,
            ..Settings::default()
        };
        if !(activity_eps > 0.0 && activity_eps < 1.0) {
            return Err(fail(UbssStatus::InvalidArgument, "activity_eps must lie in (0, 1)"));
        }
        let sep = pipeline::separate_stage(&mixtures, &h.inner, &settings)?;
        slice::from_raw_parts_mut(out, need).copy_from_slice(sep.estimates.as_slice());
        Ok(())
    })
}

/// Correlation coefficient of two equal-length sequences.
///
/// # Safety
/// `x` and `y` must hold `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ubss_correlation(x: *const f64, y: *const f64, len: usize, out: *mut f64) -> UbssStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(UbssStatus::NullPointer, "null output"));
        }
        *out = ubss::correlation(input(x, len)?, input(y, len)?)?;
        Ok(())
    })
}

/// Runs a config file end to end. `out_dir` may be null to use the
/// directory named in the config.
///
/// # Safety
/// Paths must be null-terminated strings (or null for `out_dir`).
#[no_mangle]
pub unsafe extern "C" fn ubss_run_experiment(config_path: *const c_char, out_dir: *const c_char) -> UbssStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_file(path_arg(config_path)?)?;
        let dir = if out_dir.is_null() {
            cfg.output_dir.clone()
        } else {
            path_arg(out_dir)?.to_path_buf()
        };
        pipeline::run_experiment(&cfg, &dir)?;
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `cap > 0`). Returns the full message length
/// excluding the terminator, or 0 when there is none.
///
/// # Safety
/// `buf` must hold `cap` bytes or be null with `cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn ubss_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn ubss_status_name(status: UbssStatus) -> *const c_char {
    let name: &'static CStr = match status {
        UbssStatus::Ok => c"ok",
        UbssStatus::NullPointer => c"null pointer",
        UbssStatus::InvalidArgument => c"invalid argument",
        UbssStatus::DimensionMismatch => c"dimension mismatch",
        UbssStatus::NoActiveSamples => c"no active samples",
        UbssStatus::InsufficientColumns => c"insufficient columns",
        UbssStatus::DegeneratePair => c"degenerate pair",
        UbssStatus::DegenerateSignal => c"degenerate signal",
        UbssStatus::BufferTooSmall => c"buffer too small",
        UbssStatus::Io => c"i/o error",
        UbssStatus::Parse => c"parse error",
        UbssStatus::Internal => c"internal error",
    };
    name.as_ptr()
}
