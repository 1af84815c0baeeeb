//! Ablation harness: trains one network per module or loss variant on the
//! same samples and tabulates the resulting scores.

use std::fmt::Write as _;

use candle_core::{DType, Device};
use serde::Serialize;

use crate::data::Sample;
use crate::error::Result;
use crate::losses::LossConfig;
use crate::mccm::MccmConfig;
use crate::metrics::{evaluate_pair, MetricReport};
use crate::network::{Network, NetworkConfig};
use crate::trainer::{overfit_smoke, predict_samples};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub index: usize,
    pub label: String,
    pub mccm: MccmConfig,
    pub loss: LossConfig,
}

fn mccm(foreground: bool, edge: bool, background: bool, global: bool) -> MccmConfig {
    MccmConfig {
        foreground,
        edge,
        background,
        global,
        short_connection: true,
    }
}

/// The ten branch combinations, from the plain encoder-decoder to the full
/// module. With `without_original_content` an eleventh row drops the
/// short connection of the full module.
pub fn module_rows(without_original_content: bool) -> Vec<AblationRow> {
    let mut configs = vec![
        MccmConfig::BASELINE,
        mccm(true, false, false, false),
        mccm(true, true, false, false),
        mccm(true, true, true, false),
        mccm(false, true, false, false),
        mccm(false, false, false, true),
        mccm(true, false, false, true),
        mccm(false, true, false, true),
        mccm(true, true, false, true),
        MccmConfig::FULL,
    ];
    if without_original_content {
        configs.push(MccmConfig {
            short_connection: false,
            ..MccmConfig::FULL
        });
    }
    configs
        .into_iter()
        .enumerate()
        .map(|(i, m)| AblationRow {
            index: i + 1,
            label: m.label(),
            mccm: m,
            loss: LossConfig::default(),
        })
        .collect()
}

/// Full module trained with BCE, BCE+IoU, BCE+F-m and the complete loss.
pub fn loss_rows() -> Vec<AblationRow> {
    LossConfig::ablation_rows()
        .into_iter()
        .enumerate()
        .map(|(i, loss)| AblationRow {
            index: i + 1,
            label: loss.label(),
            mccm: MccmConfig::FULL,
            loss,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationResult {
    pub row: AblationRow,
    pub parameters: usize,
    pub final_loss: f64,
    pub report: MetricReport,
}

#[derive(Debug, Clone)]
pub struct AblationSettings {
    pub base: NetworkConfig,
    pub iterations: usize,
    pub lr: f64,
    pub seed: u64,
    pub dtype: DType,
}

/// Trains every row on `train` and scores it on `eval`.
pub fn run(
    rows: &[AblationRow],
    settings: &AblationSettings,
    train: &[Sample],
    eval: &[Sample],
) -> Result<Vec<AblationResult>> {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let config = NetworkConfig {
            mccm: row.mccm,
            ..settings.base.clone()
        };
        let net = Network::new(config, settings.dtype, &Device::Cpu, settings.seed)?;
        let smoke = overfit_smoke(&net, train, settings.iterations, settings.lr, &row.loss)?;
        let preds = predict_samples(&net, eval)?;
        let per_image = preds
            .iter()
            .zip(eval)
            .map(|(p, s)| evaluate_pair(&p.view(), &s.gt.view()))
            .collect::<Result<Vec<_>>>()?;
        let report = MetricReport::aggregate(&per_image)?;
        log::info!("{}: f_max {:.4}", row.label, report.f_max);
        out.push(AblationResult {
            row: row.clone(),
            parameters: net.parameter_count(),
            final_loss: smoke.log.losses().last().copied().unwrap_or(f64::NAN),
            report,
        });
    }
    Ok(out)
}

pub fn table(results: &[AblationResult]) -> String {
    let mut s = format!(
        "{:>3}  {:<42} {:>10} {:>9} {:>8} {:>8} {:>8}\n",
        "No.", "configuration", "params", "loss", "F_max", "E_max", "S"
    );
    for r in results {
        let _ = writeln!(
            s,
            "{:>3}  {:<42} {:>10} {:>9.4} {:>8.4} {:>8.4} {:>8.4}",
            r.row.index,
            r.row.label,
            r.parameters,
            r.final_loss,
            r.report.f_max,
            r.report.e_max,
            r.report.s_alpha
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_row_order() {
        let rows = module_rows(false);
        assert_eq!(rows.len(), 10);
        assert_eq!(rows[0].label, "Baseline");
        assert_eq!(rows[3].label, "Baseline+FG+EG+BG");
        assert_eq!(rows[4].label, "Baseline+EG");
        assert_eq!(rows[9].label, "Baseline+FG+EG+BG+GIC");
        assert!(rows.iter().all(|r| r.mccm.validate().is_ok()));
        let extra = module_rows(true);
        assert_eq!(extra.len(), 11);
        assert!(extra[10].label.ends_with("w/o original content"));
    }

    #[test]
    fn loss_row_order() {
        let labels: Vec<String> = loss_rows().into_iter().map(|r| r.label).collect();
        assert_eq!(labels, ["BCE", "BCE+IoU", "BCE+F-m", "BCE+IoU+F-m"]);
    }
}
