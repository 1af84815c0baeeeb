use ndarray::ArrayView2;

use super::thresholds::{adaptive_threshold, confusion_curve, threshold_index, Confusion, LEVELS};
use super::EPS;

/// Precision weight.
pub const BETA_SQ: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct FMeasure {
    pub max: f64,
    pub mean: f64,
    pub adaptive: f64,
    /// Per-threshold precision, threshold `0..=255`.
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub curve: Vec<f64>,
}

pub fn precision_recall(c: &Confusion) -> (f64, f64) {
    let tp = c.tp as f64;
    (
        tp / ((c.tp + c.fp) as f64 + EPS),
        tp / ((c.tp + c.fn_) as f64 + EPS),
    )
}

pub fn f_beta(p: f64, r: f64) -> f64 {
    (1.0 + BETA_SQ) * p * r / (BETA_SQ * p + r + EPS)
}

pub(crate) fn from_curve(counts: &[Confusion], adaptive_index: usize) -> FMeasure {
    let (precision, recall): (Vec<f64>, Vec<f64>) = counts.iter().map(precision_recall).unzip();
    let curve: Vec<f64> = precision
        .iter()
        .zip(&recall)
        .map(|(&p, &r)| f_beta(p, r))
        .collect();
    FMeasure {
        max: curve.iter().copied().fold(0.0, f64::max),
        mean: curve.iter().sum::<f64>() / LEVELS as f64,
        adaptive: curve[adaptive_index],
        precision,
        recall,
        curve,
    }
}

/// F-measure over the 256 thresholds plus the adaptive one.
pub fn f_measure_suite(s: &ArrayView2<f32>, g: &ArrayView2<f32>) -> FMeasure {
    from_curve(
        &confusion_curve(s, g),
        threshold_index(adaptive_threshold(s)),
    )
}
