//! C interface to the mccsod toolkit.
//!
//! Every fallible function returns an [`MccsodStatus`]; on failure a
//! description is available from [`mccsod_last_error`] on the same thread.
//! Images cross the boundary as row-major `f32` buffers with values in
//! `[0, 1]`: RGB images interleaved (`height * width * 3`), maps and masks
//! single-channel (`height * width`).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use candle_core::{Device, Tensor};
use mccsod::data::{edge_ground_truth, EdgeConfig, EdgeMode};
use mccsod::losses::{saliency_loss_terms, LossConfig};
use mccsod::metrics::{evaluate_directory, evaluate_pair, EvalOptions, ImageMetrics};
use mccsod::{Error, Network};
use ndarray::{Array2, Array3, ArrayView2};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MccsodStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// File missing, unreadable or undecodable.
    Io = 3,
    /// Unpaired or empty dataset directories.
    Data = 4,
    /// Buffer or tensor sizes do not fit together.
    Dimension = 5,
    /// Checkpoint or model state unusable.
    State = 6,
    NonFinite = 7,
    Panic = 8,
    Internal = 9,
}

/// Opaque handle to a loaded network.
pub struct MccsodModel {
    net: Network,
}

/// Scores of one image, or dataset averages.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MccsodMetrics {
    pub s_alpha: f64,
    pub f_max: f64,
    pub f_mean: f64,
    pub f_adp: f64,
    pub e_max: f64,
    pub e_mean: f64,
    pub e_adp: f64,
    pub mae: f64,
    pub n_images: usize,
}

/// Saliency loss terms of one map.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MccsodLossTerms {
    pub bce: f64,
    pub iou: f64,
    pub fm: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> MccsodStatus {
    match err {
        Error::Io { .. } | Error::Image { .. } => MccsodStatus::Io,
        Error::Pairing { .. } | Error::EmptyManifest(_) => MccsodStatus::Data,
        Error::Dimension(_) => MccsodStatus::Dimension,
        Error::State(_) | Error::Checkpoint(_) | Error::MissingWeight(_) => MccsodStatus::State,
        Error::NonFinite { .. } => MccsodStatus::NonFinite,
        Error::Config(_) | Error::Contract(_) | Error::Device(_) => MccsodStatus::InvalidArgument,
        Error::Tensor(_) => MccsodStatus::Internal,
    }
}

enum Failure {
    Status(MccsodStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(MccsodStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MccsodStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MccsodStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MccsodStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| {
        Failure::Status(
            MccsodStatus::InvalidArgument,
            format!("`{what}` is not UTF-8"),
        )
    })?;
    Ok(PathBuf::from(s))
}

unsafe fn plane<'a>(
    p: *const f32,
    height: usize,
    width: usize,
    what: &str,
) -> Result<ArrayView2<'a, f32>, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if height == 0 || width == 0 {
        return Err(Failure::Status(
            MccsodStatus::Dimension,
            format!("`{what}` has zero size"),
        ));
    }
    let data = std::slice::from_raw_parts(p, height * width);
    Ok(ArrayView2::from_shape((height, width), data).expect("length matches shape"))
}

unsafe fn write_plane(out: *mut f32, map: &Array2<f32>) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let dst = std::slice::from_raw_parts_mut(out, map.len());
    for (d, s) in dst.iter_mut().zip(map.iter()) {
        *d = *s;
    }
    Ok(())
}

fn to_c(m: &ImageMetrics) -> MccsodMetrics {
    MccsodMetrics {
        s_alpha: m.s_alpha,
        f_max: m.f_max,
        f_mean: m.f_mean,
        f_adp: m.f_adp,
        e_max: m.e_max,
        e_mean: m.e_mean,
        e_adp: m.e_adp,
        mae: m.mae,
        n_images: 1,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mccsod_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn mccsod_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Loads a checkpoint written by `mccsod train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer. On
/// success `*out` receives a handle to release with [`mccsod_model_free`].
#[no_mangle]
pub unsafe extern "C" fn mccsod_model_load(
    path: *const c_char,
    out: *mut *mut MccsodModel,
) -> MccsodStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path, "path")?;
        let net = mccsod::checkpoint::load(&path)?.network(&Device::Cpu)?;
        *out = Box::into_raw(Box::new(MccsodModel { net }));
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from [`mccsod_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mccsod_model_free(model: *mut MccsodModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Square side length the network runs at.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mccsod_model_input_size(
    model: *const MccsodModel,
    out: *mut usize,
) -> MccsodStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = m.net.config().input_size;
        Ok(())
    })
}

/// Number of scalar parameters.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mccsod_model_parameter_count(
    model: *const MccsodModel,
    out: *mut usize,
) -> MccsodStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = m.net.parameter_count();
        Ok(())
    })
}

/// Saliency map of an interleaved RGB image, written to `out` at the
/// image's own resolution.
///
/// # Safety
/// `rgb` must hold `height * width * 3` floats and `out` room for
/// `height * width`.
#[no_mangle]
pub unsafe extern "C" fn mccsod_model_predict(
    model: *const MccsodModel,
    rgb: *const f32,
    height: usize,
    width: usize,
    out: *mut f32,
) -> MccsodStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if rgb.is_null() {
            return Err(null("rgb"));
        }
        if height == 0 || width == 0 {
            return Err(Failure::Status(
                MccsodStatus::Dimension,
                "image has zero size".into(),
            ));
        }
        let src = std::slice::from_raw_parts(rgb, height * width * 3);
        let chw =
            Array3::from_shape_fn((3, height, width), |(c, y, x)| src[(y * width + x) * 3 + c]);
        let map = m.net.predict(&chw)?;
        write_plane(out, &map)
    })
}

/// All measures of one prediction against a mask (binarized at 0.5).
///
/// # Safety
/// `pred` and `gt` must each hold `height * width` floats; `out` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn mccsod_evaluate_pair(
    pred: *const f32,
    gt: *const f32,
    height: usize,
    width: usize,
    out: *mut MccsodMetrics,
) -> MccsodStatus {
    guard(|| {
        let s = plane(pred, height, width, "pred")?;
        let g = plane(gt, height, width, "gt")?;
        let m = evaluate_pair(&s, &g)?;
        *out.as_mut().ok_or_else(|| null("out"))? = to_c(&m);
        Ok(())
    })
}

/// Precision and recall at the 256 thresholds of one prediction.
///
/// # Safety
/// `pred` and `gt` must each hold `height * width` floats; `precision` and
/// `recall` must each have room for 256 doubles.
#[no_mangle]
pub unsafe extern "C" fn mccsod_pr_curve(
    pred: *const f32,
    gt: *const f32,
    height: usize,
    width: usize,
    precision: *mut f64,
    recall: *mut f64,
) -> MccsodStatus {
    guard(|| {
        let s = plane(pred, height, width, "pred")?;
        let g = plane(gt, height, width, "gt")?;
        if precision.is_null() || recall.is_null() {
            return Err(null("precision/recall"));
        }
        let m = evaluate_pair(&s, &g)?;
        std::slice::from_raw_parts_mut(precision, 256).copy_from_slice(&m.precision);
        std::slice::from_raw_parts_mut(recall, 256).copy_from_slice(&m.recall);
        Ok(())
    })
}

/// Dataset averages over same-stem PNGs of two directories.
///
/// # Safety
/// Both paths must be NUL-terminated strings and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mccsod_evaluate_directory(
    pred_dir: *const c_char,
    gt_dir: *const c_char,
    out: *mut MccsodMetrics,
) -> MccsodStatus {
    guard(|| {
        let p = path_arg(pred_dir, "pred_dir")?;
        let g = path_arg(gt_dir, "gt_dir")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = evaluate_directory(&p, &g, &EvalOptions::default())?.report;
        *out = MccsodMetrics {
            s_alpha: r.s_alpha,
            f_max: r.f_max,
            f_mean: r.f_mean,
            f_adp: r.f_adp,
            e_max: r.e_max,
            e_mean: r.e_mean,
            e_adp: r.e_adp,
            mae: r.mae,
            n_images: r.n_images,
        };
        Ok(())
    })
}

/// Boundary band of a mask: pixels of the mask removed by `band_width`
/// erosions with a 3x3 cross. Writes 0/1 values.
///
/// # Safety
/// `mask` must hold `height * width` floats and `out` have the same room.
#[no_mangle]
pub unsafe extern "C" fn mccsod_edge_ground_truth(
    mask: *const f32,
    height: usize,
    width: usize,
    band_width: usize,
    out: *mut f32,
) -> MccsodStatus {
    guard(|| {
        if band_width == 0 {
            return Err(Failure::Status(
                MccsodStatus::InvalidArgument,
                "band width must be at least 1".into(),
            ));
        }
        let m = plane(mask, height, width, "mask")?.to_owned();
        let cfg = EdgeConfig {
            width: band_width,
            mode: EdgeMode::Inner,
        };
        write_plane(out, &edge_ground_truth(&m, &cfg))
    })
}

/// BCE, IoU and F-measure losses of a map against a mask of the same size.
///
/// # Safety
/// `pred` and `gt` must each hold `height * width` floats; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mccsod_saliency_loss_terms(
    pred: *const f32,
    gt: *const f32,
    height: usize,
    width: usize,
    out: *mut MccsodLossTerms,
) -> MccsodStatus {
    guard(|| {
        let to_tensor = |v: ArrayView2<f32>| -> Result<Tensor, Error> {
            let data: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
            Ok(Tensor::from_vec(data, (1, 1, height, width), &Device::Cpu)?)
        };
        let s = to_tensor(plane(pred, height, width, "pred")?)?;
        let g = to_tensor(plane(gt, height, width, "gt")?)?;
        let (_, c) = saliency_loss_terms(&s, &g, &LossConfig::default())?;
        *out.as_mut().ok_or_else(|| null("out"))? = MccsodLossTerms {
            bce: c.bce,
            iou: c.iou,
            fm: c.fm,
        };
        Ok(())
    })
}
