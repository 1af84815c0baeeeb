//! Deep-supervision losses.
//!
//! Every saliency side output is upsampled to mask resolution and scored by
//! the sum of binary cross-entropy, soft IoU and soft F-measure losses; each
//! edge map is scored by cross-entropy against the edge mask. All terms are
//! computed per image and averaged over the batch.

use candle_core::{Tensor, D};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::upsample_bilinear;
use crate::network::NetworkOutputs;

/// Smoothing constant for logs and ratio denominators.
pub const EPS: f64 = 1e-7;
/// Precision weight of the F-measure loss.
pub const BETA_SQ: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub bce_reduction: Reduction,
    pub use_iou: bool,
    pub use_fmeasure: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            bce_reduction: Reduction::Mean,
            use_iou: true,
            use_fmeasure: true,
        }
    }
}

impl LossConfig {
    pub fn label(&self) -> String {
        let mut s = String::from("BCE");
        if self.use_iou {
            s.push_str("+IoU");
        }
        if self.use_fmeasure {
            s.push_str("+F-m");
        }
        s
    }

    /// BCE, BCE+IoU, BCE+F-m and the full mixture.
    pub fn ablation_rows() -> [LossConfig; 4] {
        let row = |use_iou, use_fmeasure| LossConfig {
            use_iou,
            use_fmeasure,
            ..Self::default()
        };
        [
            row(false, false),
            row(true, false),
            row(false, true),
            row(true, true),
        ]
    }
}

/// Saliency loss terms of one level (zero for disabled terms).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Components {
    pub bce: f64,
    pub iou: f64,
    pub fm: f64,
}

impl Components {
    pub fn sum(&self) -> f64 {
        self.bce + self.iou + self.fm
    }
}

/// Scalar record of one loss evaluation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBundle {
    pub per_level_saliency: [f64; 5],
    pub per_level_edge: [f64; 5],
    pub components: [Components; 5],
    pub total: f64,
}

impl LossBundle {
    /// The ten supervised terms, saliency levels first.
    pub fn ten(&self) -> [f64; 10] {
        let mut out = [0.0; 10];
        out[..5].copy_from_slice(&self.per_level_saliency);
        out[5..].copy_from_slice(&self.per_level_edge);
        out
    }

    /// Name and value of the first non-finite term, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        for t in 0..5 {
            let c = self.components[t];
            for (name, v) in [("bce", c.bce), ("iou", c.iou), ("fm", c.fm)] {
                if !v.is_finite() {
                    return Some(format!("saliency level {} {name}", t + 1));
                }
            }
            if !self.per_level_edge[t].is_finite() {
                return Some(format!("edge level {}", t + 1));
            }
        }
        None
    }
}

/// Differentiable total plus its scalar breakdown.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub total: Tensor,
    pub bundle: LossBundle,
}

fn per_image(s: &Tensor, g: &Tensor) -> Result<(Tensor, Tensor)> {
    if s.dims() != g.dims() {
        return Err(Error::dim(format!(
            "prediction {:?} and mask {:?} differ in shape",
            s.dims(),
            g.dims()
        )));
    }
    if s.rank() == 0 {
        return Err(Error::dim("scalar prediction"));
    }
    let b = s.dims()[0];
    let g = g.to_dtype(s.dtype())?;
    Ok((s.reshape((b, ()))?, g.reshape((b, ()))?))
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?)
}

/// Clamped binary cross-entropy.
pub fn bce_loss(s: &Tensor, g: &Tensor, reduction: Reduction) -> Result<Tensor> {
    let (s, g) = per_image(s, g)?;
    let s = s.clamp(EPS, 1.0 - EPS)?;
    let pos = (&g * s.log()?)?;
    let neg = (g.affine(-1.0, 1.0)? * s.affine(-1.0, 1.0)?.log()?)?;
    let l = (pos + neg)?.neg()?;
    let l = match reduction {
        Reduction::Mean => l.mean(D::Minus1)?,
        Reduction::Sum => l.sum(D::Minus1)?,
    };
    Ok(l.mean_all()?)
}

/// `1 - (sum SG + eps) / (sum (S + G - SG) + eps)`.
pub fn iou_loss(s: &Tensor, g: &Tensor) -> Result<Tensor> {
    let (s, g) = per_image(s, g)?;
    let inter = (&s * &g)?;
    let union = ((&s + &g)? - &inter)?.sum(D::Minus1)?;
    let ratio = (inter.sum(D::Minus1)? + EPS)?.div(&(union + EPS)?)?;
    Ok(ratio.affine(-1.0, 1.0)?.mean_all()?)
}

/// `1 - F` with soft true/false positive counts.
pub fn fmeasure_loss(s: &Tensor, g: &Tensor) -> Result<Tensor> {
    let (s, g) = per_image(s, g)?;
    let tp = (&s * &g)?.sum(D::Minus1)?;
    let fp = (&s * g.affine(-1.0, 1.0)?)?.sum(D::Minus1)?;
    let fn_ = (s.affine(-1.0, 1.0)? * &g)?.sum(D::Minus1)?;
    let p = tp.div(&((&tp + &fp)? + EPS)?)?;
    let r = tp.div(&((&tp + &fn_)? + EPS)?)?;
    let num = (&p * &r)?.affine(1.0 + BETA_SQ, 0.0)?;
    let den = ((p.affine(BETA_SQ, 0.0)? + r)? + EPS)?;
    Ok(num.div(&den)?.affine(-1.0, 1.0)?.mean_all()?)
}

fn to_mask_size(map: &Tensor, mask: &Tensor) -> Result<Tensor> {
    let (_, _, h, w) = mask.dims4()?;
    let (_, _, mh, mw) = map.dims4()?;
    if (mh, mw) == (h, w) {
        Ok(map.clone())
    } else {
        upsample_bilinear(map, h, w)
    }
}

/// Loss terms of one saliency level (tensor of the summed terms and the
/// individual values).
pub fn saliency_loss_terms(
    s_t: &Tensor,
    g: &Tensor,
    config: &LossConfig,
) -> Result<(Tensor, Components)> {
    let up = to_mask_size(s_t, g)?;
    let bce = bce_loss(&up, g, config.bce_reduction)?;
    let mut c = Components {
        bce: scalar(&bce)?,
        ..Components::default()
    };
    let mut total = bce;
    if config.use_iou {
        let iou = iou_loss(&up, g)?;
        c.iou = scalar(&iou)?;
        total = (total + iou)?;
    }
    if config.use_fmeasure {
        let fm = fmeasure_loss(&up, g)?;
        c.fm = scalar(&fm)?;
        total = (total + fm)?;
    }
    Ok((total, c))
}

/// BCE + IoU + F-measure of `s_t` upsampled to the mask size.
pub fn saliency_loss(s_t: &Tensor, g: &Tensor) -> Result<Tensor> {
    Ok(saliency_loss_terms(s_t, g, &LossConfig::default())?.0)
}

/// BCE of the upsampled edge map against the edge mask.
pub fn edge_loss(a_e: &Tensor, g_e: &Tensor, reduction: Reduction) -> Result<Tensor> {
    bce_loss(&to_mask_size(a_e, g_e)?, g_e, reduction)
}

/// Sum over the five levels of saliency and edge losses. Levels whose edge
/// branch is disabled contribute no edge term.
pub fn total_loss(
    outputs: &NetworkOutputs,
    g: &Tensor,
    g_e: &Tensor,
    config: &LossConfig,
) -> Result<LossOutput> {
    if outputs.saliency.len() != 5 || outputs.edges.len() != 5 {
        return Err(Error::Contract(format!(
            "expected 5 saliency and 5 edge outputs, got {} and {}",
            outputs.saliency.len(),
            outputs.edges.len()
        )));
    }
    let mut bundle = LossBundle::default();
    let mut terms = Vec::with_capacity(10);
    for t in 0..5 {
        let (ls, c) = saliency_loss_terms(&outputs.saliency[t], g, config)?;
        bundle.components[t] = c;
        bundle.per_level_saliency[t] = c.sum();
        terms.push(ls);
        if let Some(a_e) = &outputs.edges[t] {
            let le = edge_loss(a_e, g_e, config.bce_reduction)?;
            bundle.per_level_edge[t] = scalar(&le)?;
            terms.push(le);
        }
    }
    bundle.total = bundle
        .per_level_saliency
        .iter()
        .zip(bundle.per_level_edge.iter())
        .map(|(s, e)| s + e)
        .sum();
    let total = Tensor::stack(&terms, 0)?.sum_all()?;
    Ok(LossOutput { total, bundle })
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};

    fn t(v: &[f64], h: usize, w: usize) -> Tensor {
        Tensor::from_slice(v, (1, 1, h, w), &Device::Cpu).unwrap()
    }

    fn val(x: Tensor) -> f64 {
        x.to_scalar::<f64>().unwrap()
    }

    #[test]
    fn bce_half_is_ln2() {
        let s = t(&[0.5], 1, 1);
        let g = t(&[1.0], 1, 1);
        assert!((val(bce_loss(&s, &g, Reduction::Mean).unwrap()) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bce_inverted_hits_clamp() {
        let s = t(&[0.0, 1.0, 1.0, 0.0], 2, 2);
        let g = t(&[1.0, 0.0, 0.0, 1.0], 2, 2);
        let l = val(bce_loss(&s, &g, Reduction::Mean).unwrap());
        assert!((l - (-EPS.ln())).abs() < 1e-6, "{l}");
    }

    #[test]
    fn bce_sum_scales_with_pixels() {
        let s = Tensor::full(0.5f64, (2, 1, 3, 3), &Device::Cpu).unwrap();
        let g = Tensor::ones((2, 1, 3, 3), DType::F64, &Device::Cpu).unwrap();
        let l = val(bce_loss(&s, &g, Reduction::Sum).unwrap());
        assert!((l - 9.0 * 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn fm_two_pixels() {
        let s = t(&[1.0, 1.0], 1, 2);
        let g = t(&[1.0, 0.0], 1, 2);
        let l = val(fmeasure_loss(&s, &g).unwrap());
        assert!((l - (1.0 - 0.65 / 1.15)).abs() < 1e-6);
    }

    #[test]
    fn empty_mask_conventions() {
        let z = t(&[0.0; 4], 2, 2);
        assert!(val(iou_loss(&z, &z).unwrap()).abs() < 1e-12);
        let s = t(&[0.3, 0.1, 0.9, 0.0], 2, 2);
        assert!((val(fmeasure_loss(&s, &z).unwrap()) - 1.0).abs() < 1e-12);
        assert!((val(fmeasure_loss(&z, &z).unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let a = t(&[0.0; 4], 2, 2);
        let b = t(&[0.0; 4], 1, 4);
        assert!(matches!(iou_loss(&a, &b), Err(Error::Dimension(_))));
        assert!(matches!(
            bce_loss(&a, &b, Reduction::Mean),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(fmeasure_loss(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn ablation_labels() {
        let labels: Vec<String> = LossConfig::ablation_rows()
            .iter()
            .map(LossConfig::label)
            .collect();
        assert_eq!(labels, ["BCE", "BCE+IoU", "BCE+F-m", "BCE+IoU+F-m"]);
    }
}
