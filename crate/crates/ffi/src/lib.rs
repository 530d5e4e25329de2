//! C ABI over `rarity-core`.
//!
//! Handles are opaque and owned by the caller once returned; release each
//! with its `_free` function. Every fallible call returns a [`RarityStatus`]
//! and, on failure, records a message readable through
//! [`rarity_last_error_message`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use rarity_core::activation::{score, ActivationPattern, CumulativeActivationMatrix};
use rarity_core::monitor::{ScoreMonitor, TrustDecision, Verdict};
use rarity_core::tinynet::FeedforwardModel;
use rarity_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RarityStatus {
    Ok = 0,
    InvalidArgument = 1,
    Format = 2,
    Io = 3,
    UndefinedScore = 4,
    NullPointer = 5,
    FingerprintMismatch = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RarityVerdict {
    Accept = 0,
    Refer = 1,
}

/// Outcome of a monitor assessment. `score` is meaningful only when
/// `score_defined` is true; an undefined score is always a referral.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RarityDecision {
    pub verdict: RarityVerdict,
    pub score_defined: bool,
    pub score: f64,
    pub tau_used: f64,
}

pub struct RarityModel {
    inner: FeedforwardModel,
}

pub struct RarityMatrix {
    inner: CumulativeActivationMatrix,
}

pub struct RarityMonitor {
    inner: ScoreMonitor,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> RarityStatus {
    match err {
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::UndefinedRatio => {
            RarityStatus::InvalidArgument
        }
        Error::Format(_) => RarityStatus::Format,
        Error::Io { .. } => RarityStatus::Io,
        Error::UndefinedScore { .. } => RarityStatus::UndefinedScore,
        Error::FingerprintMismatch { .. } => RarityStatus::FingerprintMismatch,
        Error::Divergence { .. } => RarityStatus::Internal,
    }
}

struct Failure(RarityStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RarityStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RarityStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RarityStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".to_string());
            RarityStatus::Internal
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = unsafe { CStr::from_ptr(path) }
        .to_str()
        .map_err(|_| Failure(RarityStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if ptr.is_null() {
        if len == 0 {
            return Ok(&[]);
        }
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

unsafe fn out_arg<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    unsafe { ptr.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { ptr.as_ref() }.ok_or_else(|| null(what))
}

fn boxed<T>(value: T, out: &mut *mut T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rarity_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |m| m.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rarity_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn rarity_model_load(path: *const c_char, out: *mut *mut RarityModel) -> RarityStatus {
    guard(|| {
        let out = unsafe { out_arg(out, "out")? };
        let inner = FeedforwardModel::load(unsafe { path_arg(path)? })?;
        boxed(RarityModel { inner }, out);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rarity_model_from_bytes(
    data: *const u8,
    len: usize,
    out: *mut *mut RarityModel,
) -> RarityStatus {
    guard(|| {
        let out = unsafe { out_arg(out, "out")? };
        let inner = FeedforwardModel::from_bytes(unsafe { slice_arg(data, len, "data")? })?;
        boxed(RarityModel { inner }, out);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rarity_model_free(model: *mut RarityModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Input width, penultimate width and class count.
#[no_mangle]
pub unsafe extern "C" fn rarity_model_dims(
    model: *const RarityModel,
    input_dim: *mut usize,
    penultimate_width: *mut usize,
    classes: *mut usize,
) -> RarityStatus {
    guard(|| {
        let m = &unsafe { ref_arg(model, "model")? }.inner;
        *unsafe { out_arg(input_dim, "input_dim")? } = m.input_dim();
        *unsafe { out_arg(penultimate_width, "penultimate_width")? } = m.penultimate_width();
        *unsafe { out_arg(classes, "classes")? } = m.classes();
        Ok(())
    })
}

fn copy_into(dst: *mut f64, dst_len: usize, src: &[f64], what: &'static str) -> Result<(), Failure> {
    if dst_len != src.len() {
        return Err(Error::DimensionMismatch {
            what,
            expected: src.len(),
            actual: dst_len,
        }
        .into());
    }
    if dst.is_null() {
        return Err(null(what));
    }
    unsafe { std::slice::from_raw_parts_mut(dst, dst_len) }.copy_from_slice(src);
    Ok(())
}

/// Forward pass. Either output buffer may be NULL to skip it; otherwise its
/// length must equal the penultimate width or class count.
#[no_mangle]
pub unsafe extern "C" fn rarity_model_forward(
    model: *const RarityModel,
    input: *const f64,
    input_len: usize,
    penultimate_out: *mut f64,
    penultimate_len: usize,
    probabilities_out: *mut f64,
    probabilities_len: usize,
) -> RarityStatus {
    guard(|| {
        let m = &unsafe { ref_arg(model, "model")? }.inner;
        let result = m.forward(unsafe { slice_arg(input, input_len, "input")? })?;
        if !penultimate_out.is_null() {
            copy_into(penultimate_out, penultimate_len, &result.penultimate_raw, "penultimate_out")?;
        }
        if !probabilities_out.is_null() {
            copy_into(probabilities_out, probabilities_len, &result.probabilities, "probabilities_out")?;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rarity_model_predict(
    model: *const RarityModel,
    input: *const f64,
    input_len: usize,
    class_out: *mut usize,
) -> RarityStatus {
    guard(|| {
        let m = &unsafe { ref_arg(model, "model")? }.inner;
        let out = unsafe { out_arg(class_out, "class_out")? };
        *out = m.predict(unsafe { slice_arg(input, input_len, "input")? })?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rarity_matrix_load(path: *const c_char, out: *mut *mut RarityMatrix) -> RarityStatus {
    guard(|| {
        let out = unsafe { out_arg(out, "out")? };
        let inner = CumulativeActivationMatrix::load(unsafe { path_arg(path)? })?;
        boxed(RarityMatrix { inner }, out);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rarity_matrix_free(matrix: *mut RarityMatrix) {
    if !matrix.is_null() {
        drop(unsafe { Box::from_raw(matrix) });
    }
}

#[no_mangle]
pub unsafe extern "C" fn rarity_matrix_dims(
    matrix: *const RarityMatrix,
    neurons: *mut usize,
    classes: *mut usize,
) -> RarityStatus {
    guard(|| {
        let m = &unsafe { ref_arg(matrix, "matrix")? }.inner;
        *unsafe { out_arg(neurons, "neurons")? } = m.neurons();
        *unsafe { out_arg(classes, "classes")? } = m.classes();
        Ok(())
    })
}

unsafe fn pattern_arg(bits: *const u8, len: usize) -> Result<ActivationPattern, Failure> {
    Ok(ActivationPattern::from_bits(unsafe { slice_arg(bits, len, "pattern")? })?)
}

/// Commonality score of a 0/1 byte pattern under `predicted_class`.
#[no_mangle]
pub unsafe extern "C" fn rarity_matrix_score(
    matrix: *const RarityMatrix,
    pattern: *const u8,
    pattern_len: usize,
    predicted_class: usize,
    score_out: *mut f64,
) -> RarityStatus {
    guard(|| {
        let m = &unsafe { ref_arg(matrix, "matrix")? }.inner;
        let out = unsafe { out_arg(score_out, "score_out")? };
        *out = score(&unsafe { pattern_arg(pattern, pattern_len)? }, m, predicted_class)?.value();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rarity_monitor_load(path: *const c_char, out: *mut *mut RarityMonitor) -> RarityStatus {
    guard(|| {
        let out = unsafe { out_arg(out, "out")? };
        let inner = ScoreMonitor::load(unsafe { path_arg(path)? })?;
        boxed(RarityMonitor { inner }, out);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rarity_monitor_free(monitor: *mut RarityMonitor) {
    if !monitor.is_null() {
        drop(unsafe { Box::from_raw(monitor) });
    }
}

#[no_mangle]
pub unsafe extern "C" fn rarity_monitor_tau(monitor: *const RarityMonitor, tau_out: *mut f64) -> RarityStatus {
    guard(|| {
        let m = &unsafe { ref_arg(monitor, "monitor")? }.inner;
        *unsafe { out_arg(tau_out, "tau_out")? } = m.threshold().tau;
        Ok(())
    })
}

/// Checks that the model file at `model_path` is the one the monitor was built for.
#[no_mangle]
pub unsafe extern "C" fn rarity_monitor_verify_model_file(
    monitor: *const RarityMonitor,
    model_path: *const c_char,
) -> RarityStatus {
    guard(|| {
        let m = &unsafe { ref_arg(monitor, "monitor")? }.inner;
        let path = unsafe { path_arg(model_path)? };
        let bytes = std::fs::read(&path).map_err(|e| Failure(RarityStatus::Io, format!("{}: {e}", path.display())))?;
        m.verify_model(&bytes)?;
        Ok(())
    })
}

fn decision(d: TrustDecision) -> RarityDecision {
    RarityDecision {
        verdict: match d.verdict {
            Verdict::Accept => RarityVerdict::Accept,
            Verdict::Refer => RarityVerdict::Refer,
        },
        score_defined: d.score.is_some(),
        score: d.score.map_or(0.0, |s| s.value()),
        tau_used: d.tau_used,
    }
}

/// Writes the decision and returns `UndefinedScore` (with a referral
/// written) when the predicted class has no activations on record.
fn finish(d: TrustDecision, out: &mut RarityDecision, class: usize) -> Result<(), Failure> {
    *out = decision(d);
    if out.score_defined {
        Ok(())
    } else {
        Err(Error::UndefinedScore { class }.into())
    }
}

#[no_mangle]
pub unsafe extern "C" fn rarity_monitor_assess(
    monitor: *const RarityMonitor,
    pattern: *const u8,
    pattern_len: usize,
    predicted_class: usize,
    out: *mut RarityDecision,
) -> RarityStatus {
    guard(|| {
        let m = &unsafe { ref_arg(monitor, "monitor")? }.inner;
        let out = unsafe { out_arg(out, "out")? };
        let d = m.assess(&unsafe { pattern_arg(pattern, pattern_len)? }, predicted_class)?;
        finish(d, out, predicted_class)
    })
}

/// As [`rarity_monitor_assess`], binarizing raw penultimate activations first.
#[no_mangle]
pub unsafe extern "C" fn rarity_monitor_assess_activations(
    monitor: *const RarityMonitor,
    activations: *const f64,
    activations_len: usize,
    predicted_class: usize,
    out: *mut RarityDecision,
) -> RarityStatus {
    guard(|| {
        let m = &unsafe { ref_arg(monitor, "monitor")? }.inner;
        let out = unsafe { out_arg(out, "out")? };
        let raw = unsafe { slice_arg(activations, activations_len, "activations")? };
        let d = m.assess_activations(raw, predicted_class)?;
        finish(d, out, predicted_class)
    })
}
