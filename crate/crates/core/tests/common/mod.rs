#![allow(dead_code)]

use candle_core::{DType, Device, Tensor};
use mccsod::data::{prepare, PrepareConfig, Sample};
use mccsod::encoder::Normalization;
use mccsod::synthetic;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-8;

/// Direct per-pixel evaluation of every score, without histograms.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub mae: f64,
    pub s: f64,
    pub f_max: f64,
    pub f_mean: f64,
    pub f_adp: f64,
    pub e_max: f64,
    pub e_mean: f64,
    pub e_adp: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

fn grey(v: f32) -> f64 {
    (f64::from(v).clamp(0.0, 1.0) * 255.0 + 1e-4)
        .floor()
        .min(255.0)
}

fn binary_at(s: &Array2<f32>, keep: impl Fn(f64) -> bool) -> Array2<f64> {
    s.mapv(|v| if keep(grey(v)) { 1.0 } else { 0.0 })
}

fn f_of(fm: &Array2<f64>, g: &Array2<f64>) -> (f64, f64, f64) {
    let mut tp = 0.0;
    let mut predicted = 0.0;
    let mut actual = 0.0;
    for (a, b) in fm.iter().zip(g.iter()) {
        tp += a * b;
        predicted += a;
        actual += b;
    }
    let p = tp / (predicted + EPS);
    let r = tp / (actual + EPS);
    (p, r, 1.3 * p * r / (0.3 * p + r + EPS))
}

fn e_of(fm: &Array2<f64>, g: &Array2<f64>) -> f64 {
    let n = fm.len() as f64;
    let gsum: f64 = g.sum();
    if gsum == 0.0 {
        return fm.iter().map(|v| 1.0 - v).sum::<f64>() / n;
    }
    if gsum == n {
        return fm.sum() / n;
    }
    let mf = fm.sum() / n;
    let mg = gsum / n;
    let mut total = 0.0;
    for (a, b) in fm.iter().zip(g.iter()) {
        let da = a - mf;
        let db = b - mg;
        let align = 2.0 * da * db / (da * da + db * db);
        total += (align + 1.0) * (align + 1.0) / 4.0;
    }
    total / n
}

fn object_part(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    2.0 * m / (m * m + 1.0 + sd)
}

fn ssim_of(s: &[f64], g: &[f64]) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let n = s.len() as f64;
    let x = s.iter().sum::<f64>() / n;
    let y = g.iter().sum::<f64>() / n;
    let d = n - 1.0 + EPS;
    let vx = s.iter().map(|a| (a - x) * (a - x)).sum::<f64>() / d;
    let vy = g.iter().map(|b| (b - y) * (b - y)).sum::<f64>() / d;
    let cxy = s.iter().zip(g).map(|(a, b)| (a - x) * (b - y)).sum::<f64>() / d;
    let alpha = 4.0 * x * y * cxy;
    let beta = (x * x + y * y) * (vx + vy);
    if alpha != 0.0 {
        alpha / beta
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn s_oracle(s: &Array2<f32>, g: &Array2<f32>) -> f64 {
    let (h, w) = s.dim();
    let sv = s.mapv(f64::from);
    let gv = g.mapv(|v| if v > 0.5 { 1.0 } else { 0.0 });
    let n = (h * w) as f64;
    let y = gv.sum() / n;
    if y == 0.0 {
        return 1.0 - sv.sum() / n;
    }
    if y == 1.0 {
        return sv.sum() / n;
    }
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    let (mut rows, mut cols, mut count) = (0.0, 0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            if gv[[r, c]] == 1.0 {
                fg.push(sv[[r, c]]);
                rows += r as f64;
                cols += c as f64;
                count += 1.0;
            } else {
                bg.push(1.0 - sv[[r, c]]);
            }
        }
    }
    let object = y * object_part(&fg) + (1.0 - y) * object_part(&bg);
    let cy = (rows / count + 1.0).round() as usize;
    let cx = (cols / count + 1.0).round() as usize;
    let mut region = 0.0;
    for (top, left) in [(true, true), (true, false), (false, true), (false, false)] {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for r in 0..h {
            for c in 0..w {
                if (r < cy) == top && (c < cx) == left {
                    a.push(sv[[r, c]]);
                    b.push(gv[[r, c]]);
                }
            }
        }
        region += a.len() as f64 / n * ssim_of(&a, &b);
    }
    (0.5 * object + 0.5 * region).max(0.0)
}

pub fn oracle(s: &Array2<f32>, g: &Array2<f32>) -> Oracle {
    let gv = g.mapv(|v| if v > 0.5 { 1.0 } else { 0.0 });
    let n = s.len() as f64;
    let mae = s
        .iter()
        .zip(gv.iter())
        .map(|(&a, &b)| (f64::from(a) - b).abs())
        .sum::<f64>()
        / n;
    let mut precision = Vec::with_capacity(256);
    let mut recall = Vec::with_capacity(256);
    let mut fs = Vec::with_capacity(256);
    let mut es = Vec::with_capacity(256);
    for t in 0..256 {
        let fm = binary_at(s, |l| l >= t as f64);
        let (p, r, f) = f_of(&fm, &gv);
        precision.push(p);
        recall.push(r);
        fs.push(f);
        es.push(e_of(&fm, &gv));
    }
    let thr = (2.0 * s.iter().map(|&v| f64::from(v)).sum::<f64>() / n).min(1.0);
    let adaptive = binary_at(s, |l| l >= 255.0 * thr - 1e-4);
    Oracle {
        mae,
        s: s_oracle(s, g),
        f_max: fs.iter().copied().fold(f64::MIN, f64::max),
        f_mean: fs.iter().sum::<f64>() / 256.0,
        f_adp: f_of(&adaptive, &gv).2,
        e_max: es.iter().copied().fold(f64::MIN, f64::max),
        e_mean: es.iter().sum::<f64>() / 256.0,
        e_adp: e_of(&adaptive, &gv),
        precision,
        recall,
    }
}

/// Random prediction/mask pair of side `n`. The mask is one random
/// rectangle, occasionally empty or full; the prediction mixes a noisy copy
/// of the mask with uniform noise.
pub fn random_pair(rng: &mut impl Rng, n: usize) -> (Array2<f32>, Array2<f32>) {
    let kind = rng.random_range(0..10);
    let g = match kind {
        0 => Array2::zeros((n, n)),
        1 => Array2::ones((n, n)),
        _ => {
            let r0 = rng.random_range(0..n);
            let r1 = rng.random_range(r0 + 1..=n);
            let c0 = rng.random_range(0..n);
            let c1 = rng.random_range(c0 + 1..=n);
            Array2::from_shape_fn((n, n), |(r, c)| {
                if (r0..r1).contains(&r) && (c0..c1).contains(&c) {
                    1.0
                } else {
                    0.0
                }
            })
        }
    };
    let mix: f32 = rng.random();
    let s = g.mapv(|v: f32| {
        let noise: f32 = rng.random();
        (mix * v + (1.0 - mix) * noise).clamp(0.0, 1.0)
    });
    (s, g)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tensor4(v: &[f64], shape: (usize, usize, usize, usize)) -> Tensor {
    Tensor::from_slice(v, shape, &Device::Cpu).unwrap()
}

pub fn scalar(t: &Tensor) -> f64 {
    t.to_dtype(DType::F64).unwrap().to_scalar::<f64>().unwrap()
}

pub fn values(t: &Tensor) -> Vec<f64> {
    t.to_dtype(DType::F64)
        .unwrap()
        .flatten_all()
        .unwrap()
        .to_vec1()
        .unwrap()
}

/// Relative difference with a small absolute floor on the scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central finite difference of `f` at `x0` along one coordinate.
pub fn central(f: &mut dyn FnMut(f64) -> f64, x0: f64, h: f64) -> f64 {
    (f(x0 + h) - f(x0 - h)) / (2.0 * h)
}

/// Prepared synthetic samples (HALF normalization, side `size`).
pub fn synthetic_samples(count: usize, size: usize, seed: u64) -> Vec<Sample> {
    let cfg = PrepareConfig {
        size,
        normalization: Normalization::HALF,
        ..PrepareConfig::default()
    };
    (0..count)
        .map(|i| {
            let (rgb, mask) = synthetic::scene(seed + i as u64, size);
            prepare(&rgb, &mask, &format!("{i:04}"), &cfg).unwrap()
        })
        .collect()
}

/// Seeded standard-normal tensor times `scale`.
pub fn randn(seed: u64, shape: &[usize], scale: f64, dtype: DType) -> Tensor {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng(seed);
    let n = shape.iter().product();
    let v: Vec<f64> = (0..n)
        .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut r))
        .collect();
    Tensor::from_vec(v, shape, &Device::Cpu)
        .unwrap()
        .to_dtype(dtype)
        .unwrap()
}
