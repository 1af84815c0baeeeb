//! Structure measure: `alpha * object + (1 - alpha) * region`.
//!
//! The region term splits both maps at the mask centroid into four
//! quadrants and combines an SSIM-style score per quadrant, weighted by
//! area. The centroid column `X` is `round(mean column + 1)` with ties away
//! from zero, the left part holding columns `0..X` (rows likewise).

use ndarray::{s, ArrayView2};

use super::EPS;

pub const ALPHA: f64 = 0.5;

fn mean(v: &ArrayView2<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.sum() / v.len() as f64
    }
}

/// `2x / (x^2 + 1 + sigma + eps)` with `x`, `sigma` the mean and sample
/// standard deviation of `values`.
fn object_score(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    let x = v.iter().sum::<f64>() / n as f64;
    let sigma = if n > 1 {
        (v.iter().map(|a| (a - x).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    2.0 * x / (x * x + 1.0 + sigma)
}

/// Object-aware term on its own (both inputs in `[0, 1]`, `g` binary).
pub fn object_term(s: &ArrayView2<f64>, g: &ArrayView2<f64>) -> f64 {
    let u = mean(g);
    let pairs = || s.iter().zip(g.iter());
    let fg = object_score(pairs().filter(|(_, &gv)| gv > 0.5).map(|(&sv, _)| sv));
    let bg = object_score(
        pairs()
            .filter(|(_, &gv)| gv <= 0.5)
            .map(|(&sv, _)| 1.0 - sv),
    );
    u * fg + (1.0 - u) * bg
}

fn ssim(s: &ArrayView2<f64>, g: &ArrayView2<f64>) -> f64 {
    let n = s.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let x = mean(s);
    let y = mean(g);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in s.iter().zip(g.iter()) {
        sxx += (a - x) * (a - x);
        syy += (b - y) * (b - y);
        sxy += (a - x) * (b - y);
    }
    let d = (n - 1.0).max(0.0) + EPS;
    let (sxx, syy, sxy) = (sxx / d, syy / d, sxy / d);
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sxx + syy);
    // beta >= |alpha|
    if alpha != 0.0 {
        alpha / beta
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn round_half_away(v: f64) -> usize {
    v.round().max(0.0) as usize
}

/// Split point `(rows above, columns left)` of a non-empty mask.
pub fn centroid_split(g: &ArrayView2<f64>) -> (usize, usize) {
    let (h, w) = g.dim();
    let mut total = 0.0;
    let (mut sy, mut sx) = (0.0, 0.0);
    for ((r, c), &v) in g.indexed_iter() {
        if v > 0.5 {
            total += 1.0;
            sy += r as f64;
            sx += c as f64;
        }
    }
    if total == 0.0 {
        return (
            round_half_away(h as f64 / 2.0),
            round_half_away(w as f64 / 2.0),
        );
    }
    (
        round_half_away(sy / total + 1.0).min(h),
        round_half_away(sx / total + 1.0).min(w),
    )
}

pub fn region_term(s: &ArrayView2<f64>, g: &ArrayView2<f64>) -> f64 {
    let (h, w) = g.dim();
    let area = (h * w) as f64;
    let (y, x) = centroid_split(g);
    let quads = [
        (s![..y, ..x], (y * x) as f64),
        (s![..y, x..], (y * (w - x)) as f64),
        (s![y.., ..x], ((h - y) * x) as f64),
        (s![y.., x..], ((h - y) * (w - x)) as f64),
    ];
    quads
        .iter()
        .map(|(sl, a)| a / area * ssim(&s.slice(sl), &g.slice(sl)))
        .sum()
}

/// Structure measure of `s` (scores in `[0, 1]`) against binary `g`.
pub fn s_measure(s: &ArrayView2<f32>, g: &ArrayView2<f32>) -> f64 {
    let s = s.mapv(f64::from);
    let g = g.mapv(|v| if v > 0.5 { 1.0 } else { 0.0 });
    let y = mean(&g.view());
    if y == 0.0 {
        return 1.0 - mean(&s.view());
    }
    if y == 1.0 {
        return mean(&s.view());
    }
    let q = ALPHA * object_term(&s.view(), &g.view())
        + (1.0 - ALPHA) * region_term(&s.view(), &g.view());
    q.max(0.0)
}
