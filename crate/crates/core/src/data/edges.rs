//! Edge ground truth from binary masks by 3x3-cross morphology.
//!
//! Pixels outside the image count as background for both erosion and
//! dilation, so a fully salient image has its frame as boundary.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    /// `mask - erode^w(mask)`: a `w`-pixel band on the inside of the boundary.
    Inner,
    /// `dilate^w(mask) - erode^w(mask)`: band straddling the boundary.
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeConfig {
    pub width: usize,
    pub mode: EdgeMode,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            width: 1,
            mode: EdgeMode::Inner,
        }
    }
}

const CROSS: [(isize, isize); 5] = [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)];

fn morph(mask: &Array2<bool>, keep_if_all: bool) -> Array2<bool> {
    let (h, w) = mask.dim();
    Array2::from_shape_fn((h, w), |(y, x)| {
        let mut hits = CROSS.iter().map(|&(dy, dx)| {
            let (ny, nx) = (y as isize + dy, x as isize + dx);
            ny >= 0
                && nx >= 0
                && (ny as usize) < h
                && (nx as usize) < w
                && mask[[ny as usize, nx as usize]]
        });
        if keep_if_all {
            hits.all(|b| b)
        } else {
            hits.any(|b| b)
        }
    })
}

pub fn erode(mask: &Array2<bool>) -> Array2<bool> {
    morph(mask, true)
}

pub fn dilate(mask: &Array2<bool>) -> Array2<bool> {
    morph(mask, false)
}

/// Binary edge mask (values 0/1) of a mask thresholded at 0.5.
pub fn edge_ground_truth(mask: &Array2<f32>, config: &EdgeConfig) -> Array2<f32> {
    let fg = mask.mapv(|v| v > 0.5);
    let mut inner = fg.clone();
    for _ in 0..config.width {
        inner = erode(&inner);
    }
    let outer = match config.mode {
        EdgeMode::Inner => fg,
        EdgeMode::Gradient => {
            let mut d = fg;
            for _ in 0..config.width {
                d = dilate(&d);
            }
            d
        }
    };
    ndarray::Zip::from(&outer)
        .and(&inner)
        .map_collect(|&o, &i| if o && !i { 1.0 } else { 0.0 })
}
