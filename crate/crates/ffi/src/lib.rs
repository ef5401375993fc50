//! C ABI over `apa-core`.
//!
//! Light fields and trained models cross the boundary as opaque handles that
//! the caller frees with the matching `*_free` function. Every fallible call
//! returns an [`ApaStatus`]; on failure `apa_last_error` describes the most
//! recent error on the calling thread. Panics never unwind into C: they are
//! caught and reported as `APA_STATUS_PANIC`.
//!
//! Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use apa_core::metrics::lf_quality;
use apa_core::nets::{
    baseline_apa_syn, baseline_avg_all, check_pair, denoise_lf, estimate_sigma, SynModel, ViewModel,
};
use apa_core::noise::{add_awgn, NoiseConfig};
use apa_core::{io, Error, LightField};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Io = 4,
    Format = 5,
    /// Checkpoint is missing, of the wrong role, or paired with one trained
    /// for a different noise level.
    Checkpoint = 6,
    Panic = 7,
}

/// Light-field dimensions: `w x h` pixels per view, `n_h x n_v` views.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ApaDims {
    pub w: usize,
    pub h: usize,
    pub n_h: usize,
    pub n_v: usize,
}

/// Opaque light field, `f32` samples in `[v][s][y][x]` order.
pub struct ApaLightField {
    inner: LightField,
}

/// Opaque trained model: a synthesis network and, optionally, the
/// compensation network it was paired with.
pub struct ApaModel {
    syn: SynModel,
    view: Option<ViewModel>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ApaStatus {
    match e {
        Error::Io { .. } => ApaStatus::Io,
        Error::Format(_) => ApaStatus::Format,
        Error::Dimension(_) => ApaStatus::DimensionMismatch,
        Error::Index(_) | Error::InvalidParam(_) | Error::Config(_) => ApaStatus::InvalidArgument,
        Error::Checkpoint(_) => ApaStatus::Checkpoint,
    }
}

/// Internal failure carrying its status and message.
struct Fail(ApaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ApaStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ApaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ApaStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            ApaStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| {
        Fail(
            ApaStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })?;
    Ok(PathBuf::from(s))
}

unsafe fn lf_arg<'a>(p: *const ApaLightField, what: &str) -> Result<&'a LightField, Fail> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null(what))
}

unsafe fn model_arg<'a>(p: *const ApaModel) -> Result<&'a ApaModel, Fail> {
    p.as_ref().ok_or_else(|| null("model"))
}

unsafe fn emit_lf(out: *mut *mut ApaLightField, lf: LightField) {
    *out = Box::into_raw(Box::new(ApaLightField { inner: lf }));
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn apa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn apa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a light field from `w*h*n_h*n_v` samples, or zeros if `data` is null.
///
/// # Safety
/// `data` must be null or point to `w*h*n_h*n_v` readable floats; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apa_lf_new(
    dims: ApaDims,
    data: *const f32,
    out: *mut *mut ApaLightField,
) -> ApaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = dims
            .w
            .checked_mul(dims.h)
            .and_then(|v| v.checked_mul(dims.n_h))
            .and_then(|v| v.checked_mul(dims.n_v))
            .ok_or_else(|| Fail(ApaStatus::InvalidArgument, "dimensions overflow".into()))?;
        let samples = if data.is_null() {
            vec![0.0; len]
        } else {
            std::slice::from_raw_parts(data, len).to_vec()
        };
        emit_lf(
            out,
            LightField::new(dims.w, dims.h, dims.n_h, dims.n_v, samples)?,
        );
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apa_lf_load(
    path: *const c_char,
    out: *mut *mut ApaLightField,
) -> ApaStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        emit_lf(out, io::load_lft(path)?);
        Ok(())
    })
}

/// # Safety
/// `lf` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn apa_lf_save(lf: *const ApaLightField, path: *const c_char) -> ApaStatus {
    guard(|| {
        let lf = lf_arg(lf, "lf")?;
        io::save_lft(lf, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `lf` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apa_lf_dims(lf: *const ApaLightField, out: *mut ApaDims) -> ApaStatus {
    guard(|| {
        let lf = lf_arg(lf, "lf")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (w, h, n_h, n_v) = lf.dims();
        *out = ApaDims { w, h, n_h, n_v };
        Ok(())
    })
}

/// Copies all samples into `dst`, which must hold exactly `len` floats.
///
/// # Safety
/// `lf` must be a live handle and `dst` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn apa_lf_copy_data(
    lf: *const ApaLightField,
    dst: *mut f32,
    len: usize,
) -> ApaStatus {
    guard(|| {
        let lf = lf_arg(lf, "lf")?;
        if dst.is_null() {
            return Err(null("dst"));
        }
        let src = lf.data();
        if len != src.len() {
            return Err(Fail(
                ApaStatus::DimensionMismatch,
                format!("buffer holds {len} floats, light field has {}", src.len()),
            ));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
        Ok(())
    })
}

/// Frees a light field; null is ignored.
///
/// # Safety
/// `lf` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apa_lf_free(lf: *mut ApaLightField) {
    if !lf.is_null() {
        drop(Box::from_raw(lf));
    }
}

/// Adds white Gaussian noise of standard deviation `sigma_255` on the
/// [0,255] scale, reproducibly for a given `seed`.
///
/// # Safety
/// `lf` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apa_add_awgn(
    lf: *const ApaLightField,
    sigma_255: f64,
    seed: u64,
    out: *mut *mut ApaLightField,
) -> ApaStatus {
    guard(|| {
        let lf = lf_arg(lf, "lf")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let noisy = add_awgn(lf, &NoiseConfig::new(sigma_255, seed)?);
        emit_lf(out, noisy);
        Ok(())
    })
}

/// Loads a synthesis checkpoint and, if `view_path` is non-null, the
/// compensation checkpoint paired with it.
///
/// # Safety
/// `syn_path` must be a NUL-terminated string, `view_path` null or one, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apa_model_load(
    syn_path: *const c_char,
    view_path: *const c_char,
    out: *mut *mut ApaModel,
) -> ApaStatus {
    guard(|| {
        let syn = SynModel::load(path_arg(syn_path, "syn_path")?)?;
        let view = if view_path.is_null() {
            None
        } else {
            let view = ViewModel::load(path_arg(view_path, "view_path")?)?;
            check_pair(&syn, &view)?;
            Some(view)
        };
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(ApaModel { syn, view }));
        Ok(())
    })
}

/// Noise level (on the [0,255] scale) the model was trained for.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apa_model_sigma(model: *const ApaModel, out: *mut f64) -> ApaStatus {
    guard(|| {
        let m = model_arg(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.syn.sigma_255;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apa_model_free(model: *mut ApaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Full two-stage denoising. The model must include a compensation network.
///
/// # Safety
/// `model` and `noisy` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apa_denoise(
    model: *const ApaModel,
    noisy: *const ApaLightField,
    out: *mut *mut ApaLightField,
) -> ApaStatus {
    guard(|| {
        let m = model_arg(model)?;
        let noisy = lf_arg(noisy, "noisy")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let view = m.view.as_ref().ok_or_else(|| {
            Fail(
                ApaStatus::Checkpoint,
                "model was loaded without a view checkpoint".into(),
            )
        })?;
        emit_lf(out, denoise_lf(noisy, &m.syn, view)?.lf_denoised);
        Ok(())
    })
}

/// Synthesis stage only.
///
/// # Safety
/// `model` and `noisy` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apa_denoise_syn(
    model: *const ApaModel,
    noisy: *const ApaLightField,
    out: *mut *mut ApaLightField,
) -> ApaStatus {
    guard(|| {
        let m = model_arg(model)?;
        let noisy = lf_arg(noisy, "noisy")?;
        if out.is_null() {
            return Err(null("out"));
        }
        emit_lf(out, baseline_apa_syn(noisy, &m.syn)?);
        Ok(())
    })
}

/// Baseline that replaces every view with the mean view.
///
/// # Safety
/// `noisy` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apa_avg_all(
    noisy: *const ApaLightField,
    out: *mut *mut ApaLightField,
) -> ApaStatus {
    guard(|| {
        let noisy = lf_arg(noisy, "noisy")?;
        if out.is_null() {
            return Err(null("out"));
        }
        emit_lf(out, baseline_avg_all(noisy));
        Ok(())
    })
}

/// Mean per-view PSNR (peak 1, may be +inf for identical inputs) and SSIM.
///
/// # Safety
/// `gt` and `test` must be live handles; `psnr` and `ssim` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn apa_quality(
    gt: *const ApaLightField,
    test: *const ApaLightField,
    psnr: *mut f64,
    ssim: *mut f64,
) -> ApaStatus {
    guard(|| {
        let gt = lf_arg(gt, "gt")?;
        let test = lf_arg(test, "test")?;
        if psnr.is_null() || ssim.is_null() {
            return Err(null("psnr/ssim output"));
        }
        let q = lf_quality(gt, test)?;
        *psnr = q.psnr_mean;
        *ssim = q.ssim_mean;
        Ok(())
    })
}

/// Noise standard deviation estimate on the [0,255] scale.
///
/// # Safety
/// `lf` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apa_estimate_sigma(lf: *const ApaLightField, out: *mut f64) -> ApaStatus {
    guard(|| {
        let lf = lf_arg(lf, "lf")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = estimate_sigma(lf);
        Ok(())
    })
}
