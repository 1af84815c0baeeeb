//! Optimization loop with deep supervision, a step learning-rate schedule,
//! snapshots and a line-delimited training log.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use candle_core::DType;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::data::{augment, Batch, DatasetManifest, Dihedral, PrepareConfig, Sample};
use crate::error::{Error, Result};
use crate::losses::{total_loss, LossBundle, LossConfig};
use crate::metrics::{evaluate_pair, ImageMetrics, MetricReport};
use crate::network::Network;
use crate::optim::{Adam, AdamConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub initial_lr: f64,
    /// Last epoch (1-based) trained at the initial rate.
    pub lr_decay_epoch: usize,
    pub lr_decay_factor: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Train on all eight dihedral variants of every image.
    pub augment: bool,
    /// Write a snapshot every this many epochs (0 disables).
    pub snapshot_every: usize,
    /// Stop after this many optimizer steps.
    pub max_iterations: Option<usize>,
    pub loss: LossConfig,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            initial_lr: 1e-4,
            lr_decay_epoch: 30,
            lr_decay_factor: 10.0,
            epochs: 39,
            seed: 0,
            augment: true,
            snapshot_every: 5,
            max_iterations: None,
            loss: LossConfig::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Schedule used for the 1400-image EORSSD training split.
    pub fn eorssd() -> Self {
        Self::default()
    }

    /// Schedule used for the 600-image ORSSD training split.
    pub fn orssd() -> Self {
        Self {
            epochs: 34,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("at least one epoch is required".into()));
        }
        let positive = |v: f64| v > 0.0;
        if !positive(self.initial_lr) || !positive(self.lr_decay_factor) {
            return Err(Error::Config(
                "learning rate and decay factor must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Learning rate of 1-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch > self.lr_decay_epoch {
            self.initial_lr / self.lr_decay_factor
        } else {
            self.initial_lr
        }
    }

    /// Training samples seen per epoch for `n` images.
    pub fn samples_per_epoch(&self, n: usize) -> usize {
        if self.augment {
            n * 8
        } else {
            n
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub epoch: usize,
    pub lr: f64,
    /// Five saliency terms then five edge terms.
    pub components: [f64; 10],
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub seconds: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub iterations: Vec<IterationRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.total).collect()
    }

    /// One JSON object per line: iterations first, then epoch summaries
    /// (tagged with `"kind"`).
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f =
            std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        let mut line = |v: serde_json::Value| writeln!(f, "{v}").map_err(|e| Error::io(path, e));
        for r in &self.iterations {
            let mut v = serde_json::to_value(r).expect("record serializes");
            v["kind"] = "iteration".into();
            line(v)?;
        }
        for r in &self.epochs {
            let mut v = serde_json::to_value(r).expect("record serializes");
            v["kind"] = "epoch".into();
            line(v)?;
        }
        Ok(())
    }
}

/// Computes the loss of one batch, applies an Adam step and records it.
pub fn train_step(
    net: &Network,
    adam: &mut Adam,
    batch: &Batch,
    loss: &LossConfig,
    lr: f64,
    iteration: usize,
) -> Result<LossBundle> {
    let out = net.forward(&batch.images)?;
    let l = total_loss(&out, &batch.gt, &batch.edge_gt, loss)?;
    if let Some(component) = l.bundle.first_non_finite() {
        return Err(Error::NonFinite {
            component,
            iteration,
        });
    }
    if !l.bundle.total.is_finite() {
        return Err(Error::NonFinite {
            component: "total".into(),
            iteration,
        });
    }
    let grads = l.total.backward()?;
    adam.step(net.store(), &grads, lr)?;
    Ok(l.bundle)
}

/// Where [`train`] writes its files.
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub dir: PathBuf,
}

impl TrainOutputs {
    pub fn final_checkpoint(&self) -> PathBuf {
        self.dir.join("final.safetensors")
    }

    pub fn snapshot(&self, epoch: usize) -> PathBuf {
        self.dir.join(format!("epoch{epoch:03}.safetensors"))
    }

    pub fn log(&self) -> PathBuf {
        self.dir.join("train_log.jsonl")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: TrainLog,
    pub checkpoint: Option<PathBuf>,
}

/// The `(image index, variant)` order of one epoch.
pub fn epoch_order(n: usize, config: &TrainConfig, epoch: usize) -> Vec<(usize, Dihedral)> {
    let variants: Vec<Dihedral> = if config.augment {
        Dihedral::all().to_vec()
    } else {
        vec![Dihedral::IDENTITY]
    };
    let mut order: Vec<(usize, Dihedral)> = (0..n)
        .flat_map(|i| variants.iter().map(move |&d| (i, d)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(epoch as u64));
    order.shuffle(&mut rng);
    order
}

/// Full training run over `manifest`. With `out` set, snapshots, the final
/// checkpoint and the log are written there.
pub fn train(
    net: &Network,
    config: &TrainConfig,
    manifest: &DatasetManifest,
    prep: &PrepareConfig,
    out: Option<&TrainOutputs>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if manifest.is_empty() {
        return Err(Error::EmptyManifest(manifest.root.join(&manifest.split)));
    }
    if prep.size != net.config().input_size {
        return Err(Error::Config(format!(
            "samples are prepared at {} but the network expects {}",
            prep.size,
            net.config().input_size
        )));
    }
    if let Some(o) = out {
        std::fs::create_dir_all(&o.dir).map_err(|e| Error::io(&o.dir, e))?;
    }
    let mut adam = Adam::new(config.adam);
    let mut log = TrainLog::default();
    let mut iteration = 0;
    'epochs: for epoch in 1..=config.epochs {
        let lr = config.lr_at(epoch);
        let started = Instant::now();
        let first = log.iterations.len();
        for chunk in epoch_order(manifest.len(), config, epoch).chunks(config.batch_size) {
            if config.max_iterations.is_some_and(|m| iteration >= m) {
                break;
            }
            let samples = chunk
                .iter()
                .map(|&(i, d)| manifest.load(i, prep).map(|s| augment(&s, d)))
                .collect::<Result<Vec<Sample>>>()?;
            let batch = Batch::from_samples(&samples, net.dtype(), net.device())?;
            iteration += 1;
            let bundle = train_step(net, &mut adam, &batch, &config.loss, lr, iteration)?;
            log::debug!(
                "epoch {epoch} iteration {iteration} loss {:.5}",
                bundle.total
            );
            log.iterations.push(IterationRecord {
                iteration,
                epoch,
                lr,
                components: bundle.ten(),
                total: bundle.total,
            });
        }
        let done = &log.iterations[first..];
        let mean_loss = done.iter().map(|r| r.total).sum::<f64>() / done.len().max(1) as f64;
        log.epochs.push(EpochRecord {
            epoch,
            lr,
            seconds: started.elapsed().as_secs_f64(),
            mean_loss,
        });
        log::info!("epoch {epoch}: lr {lr:e}, mean loss {mean_loss:.5}");
        if let Some(o) = out {
            if config.snapshot_every > 0
                && epoch % config.snapshot_every == 0
                && epoch < config.epochs
            {
                checkpoint::save(&o.snapshot(epoch), net, Some(&adam), epoch, iteration)?;
            }
        }
        if config.max_iterations.is_some_and(|m| iteration >= m) {
            break 'epochs;
        }
    }
    let mut path = None;
    if let Some(o) = out {
        let epoch = log.epochs.last().map_or(0, |e| e.epoch);
        checkpoint::save(&o.final_checkpoint(), net, Some(&adam), epoch, iteration)?;
        log.write_jsonl(&o.log())?;
        path = Some(o.final_checkpoint());
    }
    Ok(TrainOutcome {
        log,
        checkpoint: path,
    })
}

#[derive(Debug, Clone)]
pub struct SmokeOutcome {
    pub log: TrainLog,
    pub per_image: Vec<ImageMetrics>,
    pub report: MetricReport,
}

/// S(1) maps of prepared samples, one per sample.
pub fn predict_samples(net: &Network, samples: &[Sample]) -> Result<Vec<Array2<f32>>> {
    let frozen = net.inference()?;
    let batch = Batch::from_samples(samples, net.dtype(), net.device())?;
    let s1 = frozen.forward(&batch.images)?.saliency.swap_remove(0);
    let s1 = s1.to_dtype(DType::F32)?.squeeze(1)?;
    let (b, h, w) = s1.dims3()?;
    let v: Vec<f32> = s1.flatten_all()?.to_vec1()?;
    let all = ndarray::Array3::from_shape_vec((b, h, w), v).expect("shape matches");
    Ok(all.axis_iter(Axis(0)).map(|a| a.to_owned()).collect())
}

/// Memorization check: trains on a fixed handful of samples (one batch, no
/// augmentation) and scores the result on those same samples.
pub fn overfit_smoke(
    net: &Network,
    samples: &[Sample],
    iterations: usize,
    lr: f64,
    loss: &LossConfig,
) -> Result<SmokeOutcome> {
    if samples.is_empty() || samples.len() > 8 {
        return Err(Error::Config(format!(
            "smoke training takes 1 to 8 images, got {}",
            samples.len()
        )));
    }
    let batch = Batch::from_samples(samples, net.dtype(), net.device())?;
    let mut adam = Adam::new(AdamConfig::default());
    let mut log = TrainLog::default();
    let started = Instant::now();
    for iteration in 1..=iterations {
        let bundle = train_step(net, &mut adam, &batch, loss, lr, iteration)?;
        log.iterations.push(IterationRecord {
            iteration,
            epoch: 1,
            lr,
            components: bundle.ten(),
            total: bundle.total,
        });
    }
    log.epochs.push(EpochRecord {
        epoch: 1,
        lr,
        seconds: started.elapsed().as_secs_f64(),
        mean_loss: log.losses().iter().sum::<f64>() / iterations.max(1) as f64,
    });
    let preds = predict_samples(net, samples)?;
    let per_image = preds
        .iter()
        .zip(samples)
        .map(|(p, s)| evaluate_pair(&p.view(), &s.gt.view()))
        .collect::<Result<Vec<_>>>()?;
    let report = MetricReport::aggregate(&per_image)?;
    Ok(SmokeOutcome {
        log,
        per_image,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_decays_once_after_epoch_30() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_at(1), 1e-4);
        assert_eq!(c.lr_at(30), 1e-4);
        assert!((c.lr_at(31) - 1e-5).abs() < 1e-20);
        assert!((c.lr_at(39) - 1e-5).abs() < 1e-20);
    }

    #[test]
    fn dataset_presets() {
        assert_eq!(TrainConfig::eorssd().samples_per_epoch(1400), 11_200);
        assert_eq!(TrainConfig::eorssd().epochs, 39);
        assert_eq!(TrainConfig::orssd().samples_per_epoch(600), 4_800);
        assert_eq!(TrainConfig::orssd().epochs, 34);
    }

    #[test]
    fn epoch_order_is_seeded_and_complete() {
        let c = TrainConfig::default();
        let a = epoch_order(5, &c, 3);
        assert_eq!(a, epoch_order(5, &c, 3));
        assert_ne!(a, epoch_order(5, &c, 4));
        let mut sorted = a.clone();
        sorted.sort_by_key(|(i, d)| (*i, d.flip, d.turns));
        assert_eq!(sorted.len(), 40);
        sorted.dedup();
        assert_eq!(sorted.len(), 40);
    }

    #[test]
    fn invalid_config() {
        let c = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
