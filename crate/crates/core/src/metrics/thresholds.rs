//! Confusion counts of a saliency map binarized at the 256 integer
//! thresholds, computed from a pair of level histograms.

use ndarray::ArrayView2;

/// Number of thresholds (and grey levels).
pub const LEVELS: usize = 256;

/// Allowance for inputs decoded from 8-bit images through `f32`, where
/// `v / 255 * 255` can land a few ulps below `v`.
const LEVEL_TOLERANCE: f64 = 1e-4;

/// Grey level of a score in `[0, 1]`: `floor(255 s)`, clamped to `0..=255`.
pub fn level(s: f64) -> usize {
    ((s.clamp(0.0, 1.0) * 255.0 + LEVEL_TOLERANCE).floor() as usize).min(LEVELS - 1)
}

/// Index of the first threshold at or above `thr`, i.e. the binarization
/// `level >= k` that approximates `s >= thr` on the 8-bit grid.
pub fn threshold_index(thr: f64) -> usize {
    ((thr.clamp(0.0, 1.0) * 255.0 - LEVEL_TOLERANCE)
        .ceil()
        .max(0.0) as usize)
        .min(LEVELS - 1)
}

/// `min(2 * mean(s), 1)`.
pub fn adaptive_threshold(s: &ArrayView2<f32>) -> f64 {
    let mean = s.iter().map(|&v| f64::from(v)).sum::<f64>() / s.len().max(1) as f64;
    (2.0 * mean).min(1.0)
}

/// Counts of the binarization `level(s) >= t` against a binary mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Confusion counts for every threshold `0..=255`.
pub fn confusion_curve(s: &ArrayView2<f32>, g: &ArrayView2<f32>) -> Vec<Confusion> {
    let mut fg = [0u64; LEVELS];
    let mut bg = [0u64; LEVELS];
    for (&sv, &gv) in s.iter().zip(g.iter()) {
        let l = level(f64::from(sv));
        if gv > 0.5 {
            fg[l] += 1;
        } else {
            bg[l] += 1;
        }
    }
    let pos: u64 = fg.iter().sum();
    let neg: u64 = bg.iter().sum();
    let mut out = vec![Confusion::default(); LEVELS];
    let (mut tp, mut fp) = (0u64, 0u64);
    for t in (0..LEVELS).rev() {
        tp += fg[t];
        fp += bg[t];
        out[t] = Confusion {
            tp,
            fp,
            fn_: pos - tp,
            tn: neg - fp,
        };
    }
    out
}
