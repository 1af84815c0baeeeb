//! Enhanced-alignment measure of a binary foreground map against a mask.
//!
//! With `a = F - mean(F)` and `b = G - mean(G)` the per-pixel alignment is
//! `2ab / (a^2 + b^2)`, mapped through `(x + 1)^2 / 4` and averaged over
//! pixels. An empty mask scores `mean(1 - F)`, a full mask `mean(F)`.

use ndarray::ArrayView2;

use super::thresholds::{adaptive_threshold, confusion_curve, threshold_index, Confusion, LEVELS};

#[derive(Debug, Clone, PartialEq)]
pub struct EMeasure {
    pub max: f64,
    pub mean: f64,
    pub adaptive: f64,
    pub curve: Vec<f64>,
}

// `b` is nonzero for non-constant masks
fn enhanced(a: f64, b: f64) -> f64 {
    let align = 2.0 * a * b / (a * a + b * b);
    (align + 1.0).powi(2) / 4.0
}

/// E-measure of the binarization summarised by `c`.
pub fn e_measure_from_counts(c: &Confusion) -> f64 {
    let n = c.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let predicted = (c.tp + c.fp) as f64;
    let pos = c.tp + c.fn_;
    if pos == 0 {
        return (n - predicted) / n;
    }
    if c.fp + c.tn == 0 {
        return predicted / n;
    }
    let mu_f = predicted / n;
    let mu_g = pos as f64 / n;
    let (f1, f0) = (1.0 - mu_f, -mu_f);
    let (g1, g0) = (1.0 - mu_g, -mu_g);
    (c.tp as f64 * enhanced(f1, g1)
        + c.fp as f64 * enhanced(f1, g0)
        + c.fn_ as f64 * enhanced(f0, g1)
        + c.tn as f64 * enhanced(f0, g0))
        / n
}

pub(crate) fn from_curve(counts: &[Confusion], adaptive_index: usize) -> EMeasure {
    let curve: Vec<f64> = counts.iter().map(e_measure_from_counts).collect();
    EMeasure {
        max: curve.iter().copied().fold(0.0, f64::max),
        mean: curve.iter().sum::<f64>() / LEVELS as f64,
        adaptive: curve[adaptive_index],
        curve,
    }
}

pub fn e_measure_suite(s: &ArrayView2<f32>, g: &ArrayView2<f32>) -> EMeasure {
    from_curve(
        &confusion_curve(s, g),
        threshold_index(adaptive_threshold(s)),
    )
}
