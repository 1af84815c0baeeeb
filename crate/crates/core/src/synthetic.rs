//! Procedural image/mask pairs for smoke runs and tests: a textured
//! background with one or two flat-coloured ellipses or rectangles.

use std::path::Path;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::write_gray_png;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Shape {
    Ellipse { cy: f32, cx: f32, ry: f32, rx: f32 },
    Rect { y0: f32, x0: f32, y1: f32, x1: f32 },
}

impl Shape {
    fn contains(&self, y: f32, x: f32) -> bool {
        match *self {
            Shape::Ellipse { cy, cx, ry, rx } => {
                ((y - cy) / ry).powi(2) + ((x - cx) / rx).powi(2) <= 1.0
            }
            Shape::Rect { y0, x0, y1, x1 } => y >= y0 && y < y1 && x >= x0 && x < x1,
        }
    }
}

/// One `size x size` scene: RGB in `[0, 1]` as `(3, h, w)` and a binary mask.
pub fn scene(seed: u64, size: usize) -> (Array3<f32>, Array2<f32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size as f32;
    let shapes: Vec<Shape> = (0..rng.random_range(1..=2))
        .map(|_| {
            let cy = rng.random_range(0.25..0.75) * n;
            let cx = rng.random_range(0.25..0.75) * n;
            let ry = rng.random_range(0.1..0.22) * n;
            let rx = rng.random_range(0.1..0.22) * n;
            if rng.random_bool(0.5) {
                Shape::Ellipse { cy, cx, ry, rx }
            } else {
                Shape::Rect {
                    y0: cy - ry,
                    x0: cx - rx,
                    y1: cy + ry,
                    x1: cx + rx,
                }
            }
        })
        .collect();
    let fg: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.55..0.95));
    let bg: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.45));
    let freq = rng.random_range(0.1..0.3);
    let phase = rng.random_range(0.0..std::f32::consts::TAU);

    let mask = Array2::from_shape_fn((size, size), |(y, x)| {
        let (yf, xf) = (y as f32 + 0.5, x as f32 + 0.5);
        if shapes.iter().any(|s| s.contains(yf, xf)) {
            1.0
        } else {
            0.0
        }
    });
    let mut rgb = Array3::zeros((3, size, size));
    for y in 0..size {
        for x in 0..size {
            let texture = 0.08 * ((x as f32 * freq + phase).sin() + (y as f32 * freq * 0.7).cos());
            for c in 0..3 {
                let noise = rng.random_range(-0.04..0.04);
                let base = if mask[[y, x]] > 0.5 {
                    fg[c]
                } else {
                    bg[c] + texture
                };
                rgb[[c, y, x]] = (base + noise).clamp(0.0, 1.0);
            }
        }
    }
    (rgb, mask)
}

/// Writes `<root>/<split>/image/NNNN.png` and `<root>/<split>/GT/NNNN.png`.
pub fn write_dataset(root: &Path, split: &str, count: usize, size: usize, seed: u64) -> Result<()> {
    let img_dir = root.join(split).join("image");
    let gt_dir = root.join(split).join("GT");
    for d in [&img_dir, &gt_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    for i in 0..count {
        let (rgb, mask) = scene(seed.wrapping_mul(1_000_003).wrapping_add(i as u64), size);
        let bytes: Vec<u8> = (0..size * size * 3)
            .map(|k| {
                let (p, c) = (k / 3, k % 3);
                (rgb[[c, p / size, p % size]] * 255.0).round() as u8
            })
            .collect();
        let path = img_dir.join(format!("{i:04}.png"));
        image::RgbImage::from_raw(size as u32, size as u32, bytes)
            .expect("buffer matches size")
            .save(&path)
            .map_err(|source| Error::Image { path, source })?;
        write_gray_png(&gt_dir.join(format!("{i:04}.png")), &mask)?;
    }
    Ok(())
}
