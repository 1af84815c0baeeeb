//! Saliency evaluation: S-measure, F-measure, E-measure, MAE and the
//! precision-recall curve.
//!
//! Maps are scored per image in `f64` and averaged arithmetically; PR
//! points are averaged threshold by threshold.

mod emeasure;
mod fmeasure;
mod smeasure;
pub mod thresholds;

pub use emeasure::{e_measure_from_counts, e_measure_suite, EMeasure};
pub use fmeasure::{f_beta, f_measure_suite, precision_recall, FMeasure, BETA_SQ};
pub use smeasure::{centroid_split, object_term, region_term, s_measure, ALPHA};
pub use thresholds::LEVELS;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{binarize, read_gray};
use crate::error::{Error, Result};
use crate::resize;

/// Guard added to every metric denominator.
pub const EPS: f64 = 1e-8;

fn check_shapes(s: &ArrayView2<f32>, g: &ArrayView2<f32>) -> Result<()> {
    if s.dim() != g.dim() {
        return Err(Error::dim(format!(
            "prediction {:?} and mask {:?} differ in shape",
            s.dim(),
            g.dim()
        )));
    }
    if s.is_empty() {
        return Err(Error::dim("empty map"));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(s: &ArrayView2<f32>, g: &ArrayView2<f32>) -> Result<f64> {
    check_shapes(s, g)?;
    let sum: f64 = s
        .iter()
        .zip(g.iter())
        .map(|(&a, &b)| (f64::from(a) - f64::from(b)).abs())
        .sum();
    Ok(sum / s.len() as f64)
}

/// All measures of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub s_alpha: f64,
    pub f_max: f64,
    pub f_mean: f64,
    pub f_adp: f64,
    pub e_max: f64,
    pub e_mean: f64,
    pub e_adp: f64,
    pub mae: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

/// Scores `s` (values in `[0, 1]`) against the mask `g` (binarized at 0.5).
pub fn evaluate_pair(s: &ArrayView2<f32>, g: &ArrayView2<f32>) -> Result<ImageMetrics> {
    check_shapes(s, g)?;
    let g = binarize(&g.to_owned());
    let gv = g.view();
    let counts = thresholds::confusion_curve(s, &gv);
    let k = thresholds::threshold_index(thresholds::adaptive_threshold(s));
    let f = fmeasure::from_curve(&counts, k);
    let e = emeasure::from_curve(&counts, k);
    Ok(ImageMetrics {
        s_alpha: s_measure(s, &gv),
        f_max: f.max,
        f_mean: f.mean,
        f_adp: f.adaptive,
        e_max: e.max,
        e_mean: e.mean,
        e_adp: e.adaptive,
        mae: mae(s, &gv)?,
        precision: f.precision,
        recall: f.recall,
    })
}

/// Dataset-level averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub s_alpha: f64,
    pub f_max: f64,
    pub f_mean: f64,
    pub f_adp: f64,
    pub e_max: f64,
    pub e_mean: f64,
    pub e_adp: f64,
    pub mae: f64,
    /// Mean `(precision, recall)` per threshold `0..=255`.
    pub pr: Vec<(f64, f64)>,
    pub n_images: usize,
}

impl MetricReport {
    pub fn aggregate<'a>(items: impl IntoIterator<Item = &'a ImageMetrics>) -> Result<Self> {
        let items: Vec<&ImageMetrics> = items.into_iter().collect();
        let n = items.len();
        if n == 0 {
            return Err(Error::Contract("no images to aggregate".into()));
        }
        let avg = |f: fn(&ImageMetrics) -> f64| items.iter().map(|m| f(m)).sum::<f64>() / n as f64;
        let pr = (0..LEVELS)
            .map(|t| {
                let p = items.iter().map(|m| m.precision[t]).sum::<f64>() / n as f64;
                let r = items.iter().map(|m| m.recall[t]).sum::<f64>() / n as f64;
                (p, r)
            })
            .collect();
        Ok(Self {
            s_alpha: avg(|m| m.s_alpha),
            f_max: avg(|m| m.f_max),
            f_mean: avg(|m| m.f_mean),
            f_adp: avg(|m| m.f_adp),
            e_max: avg(|m| m.e_max),
            e_mean: avg(|m| m.e_mean),
            e_adp: avg(|m| m.e_adp),
            mae: avg(|m| m.mae),
            pr,
            n_images: n,
        })
    }

    /// `(name, value)` pairs in table order.
    pub fn scalars(&self) -> [(&'static str, f64); 8] {
        [
            ("s_alpha", self.s_alpha),
            ("f_max", self.f_max),
            ("f_mean", self.f_mean),
            ("f_adp", self.f_adp),
            ("e_max", self.e_max),
            ("e_mean", self.e_mean),
            ("e_adp", self.e_adp),
            ("mae", self.mae),
        ]
    }

    pub fn table(&self) -> String {
        let mut head = String::new();
        let mut row = String::new();
        for (name, v) in self.scalars() {
            let _ = write!(head, "{name:>9}");
            let _ = write!(row, "{v:>9.4}");
        }
        format!("{head}\n{row}\n({} images)\n", self.n_images)
    }

    /// `threshold,precision,recall` with one row per threshold.
    pub fn pr_csv(&self) -> String {
        let mut s = String::from("threshold,precision,recall\n");
        for (t, (p, r)) in self.pr.iter().enumerate() {
            let _ = writeln!(s, "{t},{p},{r}");
        }
        s
    }

    /// JSON report carrying full-precision values.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn write_pr_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.pr_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Leave out images whose mask has no foreground.
    pub skip_empty_gt: bool,
    /// Score at this square size instead of each mask's own size.
    pub fixed_size: Option<usize>,
}

fn png_stems(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_img = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"));
        if is_img {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path);
            }
        }
    }
    Ok(out)
}

/// Per-image results of a directory evaluation, sorted by stem.
#[derive(Debug, Clone)]
pub struct DirectoryEvaluation {
    pub report: MetricReport,
    pub per_image: Vec<(String, ImageMetrics)>,
}

/// Scores every prediction in `pred_dir` against the same-stem mask in
/// `gt_dir`. Predictions are resized to the mask's size unless
/// `options.fixed_size` resizes both.
pub fn evaluate_directory(
    pred_dir: &Path,
    gt_dir: &Path,
    options: &EvalOptions,
) -> Result<DirectoryEvaluation> {
    let preds = png_stems(pred_dir)?;
    let gts = png_stems(gt_dir)?;
    let unpaired: Vec<String> = preds
        .keys()
        .filter(|k| !gts.contains_key(*k))
        .map(|k| format!("prediction/{k}"))
        .chain(
            gts.keys()
                .filter(|k| !preds.contains_key(*k))
                .map(|k| format!("GT/{k}")),
        )
        .collect();
    if !unpaired.is_empty() {
        return Err(Error::Pairing {
            dir: pred_dir.to_path_buf(),
            stems: unpaired,
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyManifest(pred_dir.to_path_buf()));
    }
    let mut per_image = Vec::with_capacity(preds.len());
    for (stem, pred_path) in &preds {
        let (s, g) = load_pair(pred_path, &gts[stem], options.fixed_size)?;
        if options.skip_empty_gt && g.iter().all(|&v| v <= 0.5) {
            continue;
        }
        per_image.push((stem.clone(), evaluate_pair(&s.view(), &g.view())?));
    }
    let report = MetricReport::aggregate(per_image.iter().map(|(_, m)| m))?;
    Ok(DirectoryEvaluation { report, per_image })
}

fn load_pair(pred: &Path, gt: &Path, fixed: Option<usize>) -> Result<(Array2<f32>, Array2<f32>)> {
    let mut s = read_gray(pred)?;
    let mut g = read_gray(gt)?;
    if let Some(n) = fixed {
        s = resize::bilinear(&s, n, n);
        g = resize::nearest(&g, n, n);
    } else if s.dim() != g.dim() {
        s = resize::bilinear(&s, g.dim().0, g.dim().1);
    }
    Ok((s.mapv(|v| v.clamp(0.0, 1.0)), binarize(&g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mae_cases() {
        let g = array![[1.0f32, 0.0], [0.0, 1.0]];
        assert_eq!(mae(&g.view(), &g.view()).unwrap(), 0.0);
        let inv = g.mapv(|v| 1.0 - v);
        assert_eq!(mae(&inv.view(), &g.view()).unwrap(), 1.0);
        let q = Array2::from_elem((3, 3), 0.25f32);
        let z = Array2::zeros((3, 3));
        assert!((mae(&q.view(), &z.view()).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn perfect_pair() {
        let g = array![[1.0f32, 0.0, 0.0], [1.0, 1.0, 0.0]];
        let m = evaluate_pair(&g.view(), &g.view()).unwrap();
        for v in [m.s_alpha, m.f_max, m.f_adp, m.e_max, m.e_adp] {
            assert!((v - 1.0).abs() < 1e-6, "{m:?}");
        }
        assert_eq!(m.mae, 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let a = Array2::<f32>::zeros((2, 2));
        let b = Array2::<f32>::zeros((2, 3));
        assert!(matches!(
            evaluate_pair(&a.view(), &b.view()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn report_of_one_is_that_image() {
        let s = array![[0.9f32, 0.2], [0.4, 0.7]];
        let g = array![[1.0f32, 0.0], [0.0, 1.0]];
        let m = evaluate_pair(&s.view(), &g.view()).unwrap();
        let r = MetricReport::aggregate([&m]).unwrap();
        assert_eq!(r.f_max, m.f_max);
        assert_eq!(r.s_alpha, m.s_alpha);
        assert_eq!(r.pr.len(), 256);
        assert_eq!(r.pr_csv().lines().count(), 257);
    }
}
