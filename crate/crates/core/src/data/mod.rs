//! Dataset ingestion and sample preparation.
//!
//! Layout on disk: `<root>/<split>/image/*.{png,jpg,jpeg}` and
//! `<root>/<split>/GT/*.png`, paired by file stem.

mod augment;
mod edges;
mod manifest;

pub use augment::{augment, Dihedral};
pub use edges::{dilate, edge_ground_truth, erode, EdgeConfig, EdgeMode};
pub use manifest::{load_dataset, DatasetManifest};

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::encoder::Normalization;
use crate::error::{Error, Result};
use crate::resize;

/// An aligned training triple.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Normalized RGB, `(3, h, w)`.
    pub image: Array3<f32>,
    /// Binary mask.
    pub gt: Array2<f32>,
    /// Binary edge mask derived from `gt`.
    pub edge_gt: Array2<f32>,
    pub id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub size: usize,
    pub normalization: Normalization,
    pub edge: EdgeConfig,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            size: 256,
            normalization: Normalization::IMAGENET,
            edge: EdgeConfig::default(),
        }
    }
}

/// RGB image as `(3, h, w)` floats in `[0, 1]`.
pub fn read_rgb(path: &Path) -> Result<Array3<f32>> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb32f();
    let (w, h) = img.dimensions();
    let (w, h) = (w as usize, h as usize);
    let raw = img.into_raw();
    Ok(Array3::from_shape_fn((3, h, w), |(c, y, x)| {
        raw[(y * w + x) * 3 + c]
    }))
}

/// Single-channel image as floats in `[0, 1]`.
pub fn read_gray(path: &Path) -> Result<Array2<f32>> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_luma32f();
    let (w, h) = img.dimensions();
    Array2::from_shape_vec((h as usize, w as usize), img.into_raw())
        .map_err(|e| Error::dim(e.to_string()))
}

/// Writes `map` (values in `[0, 1]`) as an 8-bit grayscale PNG.
pub fn write_gray_png(path: &Path, map: &Array2<f32>) -> Result<()> {
    let (h, w) = map.dim();
    let bytes: Vec<u8> = map
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = image::GrayImage::from_raw(w as u32, h as u32, bytes)
        .expect("buffer length matches dimensions");
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn resize_rgb(rgb: &Array3<f32>, height: usize, width: usize) -> Array3<f32> {
    let planes: Vec<Array2<f32>> = rgb
        .axis_iter(Axis(0))
        .map(|p| resize::bilinear(&p.to_owned(), height, width))
        .collect();
    let views: Vec<_> = planes.iter().map(|p| p.view()).collect();
    ndarray::stack(Axis(0), &views).expect("planes share a shape")
}

pub fn normalize_rgb(rgb: &Array3<f32>, norm: &Normalization) -> Array3<f32> {
    let mut out = rgb.clone();
    for (c, mut plane) in out.axis_iter_mut(Axis(0)).enumerate() {
        plane.mapv_inplace(|v| (v - norm.mean[c]) / norm.std[c]);
    }
    out
}

pub fn binarize(mask: &Array2<f32>) -> Array2<f32> {
    mask.mapv(|v| if v > 0.5 { 1.0 } else { 0.0 })
}

/// Resizes image (bilinear) and mask (nearest), binarizes the mask at 0.5,
/// normalizes the image and derives the edge mask.
pub fn prepare(
    rgb: &Array3<f32>,
    gt: &Array2<f32>,
    id: &str,
    config: &PrepareConfig,
) -> Result<Sample> {
    let (_, h, w) = rgb.dim();
    if gt.dim() != (h, w) {
        return Err(Error::dim(format!(
            "{id}: image is {h}x{w} but mask is {}x{}",
            gt.dim().0,
            gt.dim().1
        )));
    }
    let n = config.size;
    let image = normalize_rgb(&resize_rgb(rgb, n, n), &config.normalization);
    let gt = binarize(&resize::nearest(gt, n, n));
    let edge_gt = edge_ground_truth(&gt, &config.edge);
    Ok(Sample {
        image,
        gt,
        edge_gt,
        id: id.to_string(),
    })
}

/// Stacked batch tensors: images `(b, 3, h, w)`, masks `(b, 1, h, w)`.
pub struct Batch {
    pub images: Tensor,
    pub gt: Tensor,
    pub edge_gt: Tensor,
}

impl Batch {
    pub fn from_samples(samples: &[Sample], dtype: DType, device: &Device) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Contract("empty batch".into()))?;
        let (_, h, w) = first.image.dim();
        let b = samples.len();
        let mut img = Vec::with_capacity(b * 3 * h * w);
        let mut gt = Vec::with_capacity(b * h * w);
        let mut edge = Vec::with_capacity(b * h * w);
        for s in samples {
            if s.image.dim() != (3, h, w) {
                return Err(Error::dim(format!("sample {} has a different size", s.id)));
            }
            img.extend(s.image.iter());
            gt.extend(s.gt.iter());
            edge.extend(s.edge_gt.iter());
        }
        let t = |v: Vec<f32>, c: usize| -> Result<Tensor> {
            Ok(Tensor::from_vec(v, (b, c, h, w), device)?.to_dtype(dtype)?)
        };
        Ok(Self {
            images: t(img, 3)?,
            gt: t(gt, 1)?,
            edge_gt: t(edge, 1)?,
        })
    }
}
