//! Bilinear and nearest-neighbour resampling shared by the data pipeline,
//! the evaluator and the differentiable upsampling in the losses.
//!
//! Bilinear sampling uses half-pixel centres (`src = (dst + 0.5) * in / out - 0.5`,
//! clamped to the valid range), the convention of OpenCV's `INTER_LINEAR`
//! and of `align_corners = false` upsampling.

use ndarray::Array2;

/// Interpolation taps for one output coordinate: `(lo, hi, frac)` meaning
/// `value = (1 - frac) * src[lo] + frac * src[hi]`.
pub fn bilinear_taps(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    assert!(input > 0 && output > 0, "empty resize axis");
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(input - 1);
            let hi = (lo + 1).min(input - 1);
            let frac = if hi == lo { 0.0 } else { src - lo as f64 };
            (lo, hi, frac)
        })
        .collect()
}

/// Dense `output x input` interpolation matrix, row-major.
pub fn bilinear_matrix(input: usize, output: usize) -> Vec<f64> {
    let mut m = vec![0.0; output * input];
    for (i, (lo, hi, frac)) in bilinear_taps(input, output).into_iter().enumerate() {
        m[i * input + lo] += 1.0 - frac;
        m[i * input + hi] += frac;
    }
    m
}

pub fn bilinear(src: &Array2<f32>, height: usize, width: usize) -> Array2<f32> {
    let (h, w) = src.dim();
    if (h, w) == (height, width) {
        return src.clone();
    }
    let ty = bilinear_taps(h, height);
    let tx = bilinear_taps(w, width);
    Array2::from_shape_fn((height, width), |(y, x)| {
        let (y0, y1, fy) = ty[y];
        let (x0, x1, fx) = tx[x];
        let top = (1.0 - fx) * src[[y0, x0]] as f64 + fx * src[[y0, x1]] as f64;
        let bottom = (1.0 - fx) * src[[y1, x0]] as f64 + fx * src[[y1, x1]] as f64;
        ((1.0 - fy) * top + fy * bottom) as f32
    })
}

/// Nearest-neighbour resize, `src = floor(dst * in / out)`.
pub fn nearest(src: &Array2<f32>, height: usize, width: usize) -> Array2<f32> {
    let (h, w) = src.dim();
    if (h, w) == (height, width) {
        return src.clone();
    }
    Array2::from_shape_fn((height, width), |(y, x)| {
        let sy = ((y * h) / height).min(h - 1);
        let sx = ((x * w) / width).min(w - 1);
        src[[sy, sx]]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rows_of_matrix_sum_to_one() {
        for (i, o) in [(1, 7), (16, 256), (5, 3), (256, 512), (512, 256)] {
            let m = bilinear_matrix(i, o);
            for r in 0..o {
                let s: f64 = m[r * i..(r + 1) * i].iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_x_upsample_matches_hand_values() {
        // src = [0, 4]; out coords map to -0.25, 0.25, 0.75, 1.25 -> clamp/ends
        let src = array![[0.0f32, 4.0]];
        let up = bilinear(&src, 1, 4);
        assert_eq!(up, array![[0.0f32, 1.0, 3.0, 4.0]]);
    }

    #[test]
    fn from_single_pixel_is_constant() {
        let src = array![[2.5f32]];
        let up = bilinear(&src, 4, 6);
        assert!(up.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn nearest_halving_picks_even_pixels() {
        let src = Array2::from_shape_fn((4, 4), |(y, x)| (y * 4 + x) as f32);
        let down = nearest(&src, 2, 2);
        assert_eq!(down, array![[0.0f32, 2.0], [8.0, 10.0]]);
    }
}
