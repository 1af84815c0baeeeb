//! Full encoder / MCCM / decoder network.
//!
//! The decoder mirrors the encoder: block `D5` (three 3x3 convolutions)
//! consumes the level-5 module output; for `t = 4..1` a 2x2 stride-2
//! transposed convolution maps `D(t+1)`'s output from `c(t+1)` to `c(t)`
//! channels at twice the resolution, the level-`t` module output is added,
//! and `D(t)` (3, 3, 2, 2 convolutions for t = 4..1) refines the sum. Each
//! decoder block feeds a 1x1 convolution and a sigmoid giving the side
//! output `S(t)`. `S(1)` is the final prediction.

use candle_core::{DType, Device, Tensor};
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::attention::{reduced_width, DEFAULT_REDUCTION, DEFAULT_SPATIAL_KERNEL};
use crate::encoder::{
    encoder_param_count, Encoder, EncoderParams, Normalization, BLOCK_DEPTHS, LEVELS,
    VGG16_CHANNELS,
};
use crate::error::{Error, Result};
use crate::layers::{sigmoid, Conv2d, Upsample2x};
use crate::mccm::{Mccm, MccmConfig, MccmOutputs};
use crate::params::{Missing, ParamStore};
use crate::resize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub mccm: MccmConfig,
    pub input_size: usize,
    pub use_pretrained_encoder: bool,
    /// Channels per level; VGG-16 uses `[64, 128, 256, 512, 512]`.
    pub channels: [usize; 5],
    /// Channel-attention reduction ratio.
    pub reduction: usize,
    /// Spatial-attention kernel size (odd).
    pub spatial_kernel: usize,
    pub normalization: Normalization,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            mccm: MccmConfig::FULL,
            input_size: 256,
            use_pretrained_encoder: true,
            channels: VGG16_CHANNELS,
            reduction: DEFAULT_REDUCTION,
            spatial_kernel: DEFAULT_SPATIAL_KERNEL,
            normalization: Normalization::IMAGENET,
        }
    }
}

impl NetworkConfig {
    /// A narrow network for quick experiments and tests.
    pub fn surrogate(channels: [usize; 5], input_size: usize) -> Self {
        Self {
            input_size,
            use_pretrained_encoder: false,
            channels,
            normalization: Normalization::HALF,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || !self.input_size.is_multiple_of(16) {
            return Err(Error::Config(format!(
                "input size {} is not a positive multiple of 16",
                self.input_size
            )));
        }
        if self.channels.contains(&0) {
            return Err(Error::Config("zero-width level in channel plan".into()));
        }
        if self.spatial_kernel.is_multiple_of(2) {
            return Err(Error::Config("spatial kernel must be odd".into()));
        }
        self.mccm.validate()
    }

    /// Spatial size of level `t` (1-based).
    pub fn level_size(&self, t: usize) -> usize {
        self.input_size >> (t - 1)
    }
}

/// Side outputs of one forward pass, finest level first.
#[derive(Debug, Clone)]
pub struct NetworkOutputs {
    /// `S(1)..S(5)`, each `(batch, 1, h_t, w_t)` in `[0, 1]`.
    pub saliency: Vec<Tensor>,
    /// `a_e` per level, `None` when the edge branch is disabled.
    pub edges: Vec<Option<Tensor>>,
    pub encoder_features: Vec<Tensor>,
    pub modules: Vec<MccmOutputs>,
}

#[derive(Clone, Debug)]
struct Decoder {
    blocks: Vec<Vec<Conv2d>>,
    ups: Vec<Upsample2x>,
    heads: Vec<Conv2d>,
}

impl Decoder {
    fn new(store: &mut ParamStore, channels: [usize; 5]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(LEVELS);
        let mut heads = Vec::with_capacity(LEVELS);
        let mut ups = Vec::with_capacity(LEVELS - 1);
        for t in 1..=LEVELS {
            let c = channels[t - 1];
            let convs = (1..=BLOCK_DEPTHS[t - 1])
                .map(|i| Conv2d::new(store, &format!("dec.b{t}.c{i}"), c, c, 3))
                .collect::<Result<Vec<_>>>()?;
            blocks.push(convs);
            heads.push(Conv2d::new(store, &format!("dec.head{t}"), c, 1, 1)?);
            if t < LEVELS {
                ups.push(Upsample2x::new(
                    store,
                    &format!("dec.up{t}"),
                    channels[t],
                    c,
                )?);
            }
        }
        Ok(Self { blocks, ups, heads })
    }

    fn forward(&self, features: &[Tensor]) -> Result<Vec<Tensor>> {
        let mut saliency = vec![None; LEVELS];
        let mut x = features[LEVELS - 1].clone();
        for t in (0..LEVELS).rev() {
            if t < LEVELS - 1 {
                x = (self.ups[t].forward(&x)? + &features[t])?;
            }
            for conv in &self.blocks[t] {
                x = conv.forward(&x)?.relu()?;
            }
            saliency[t] = Some(sigmoid(&self.heads[t].forward(&x)?)?);
        }
        Ok(saliency
            .into_iter()
            .map(|s| s.expect("all levels decoded"))
            .collect())
    }
}

#[derive(Clone)]
pub struct Network {
    config: NetworkConfig,
    store: ParamStore,
    encoder: Encoder,
    modules: Vec<Mccm>,
    decoder: Decoder,
}

impl Network {
    /// Randomly initialized network (He-normal weights, zero biases).
    pub fn new(config: NetworkConfig, dtype: DType, device: &Device, seed: u64) -> Result<Self> {
        config.validate()?;
        let store = ParamStore::new(dtype, device, seed);
        Self::build(config, store)
    }

    /// Encoder taken from `pretrained`, everything else random.
    pub fn with_pretrained(
        config: NetworkConfig,
        pretrained: &EncoderParams,
        dtype: DType,
        device: &Device,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new(dtype, device, seed);
        pretrained.install(&mut store)?;
        Self::build(config, store)
    }

    /// Rebuilds from a complete set of tensors; anything missing or
    /// misshapen is an error.
    pub fn from_store(config: NetworkConfig, mut store: ParamStore) -> Result<Self> {
        config.validate()?;
        store.set_missing(Missing::Error);
        Self::build(config, store)
    }

    fn build(config: NetworkConfig, mut store: ParamStore) -> Result<Self> {
        let encoder = Encoder::new(&mut store, config.channels, config.input_size)?;
        let modules = (1..=LEVELS)
            .map(|t| {
                Mccm::new(
                    &mut store,
                    &format!("mccm{t}"),
                    config.channels[t - 1],
                    config.mccm,
                    config.reduction,
                    config.spatial_kernel,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let decoder = Decoder::new(&mut store, config.channels)?;
        Ok(Self {
            config,
            store,
            encoder,
            modules,
            decoder,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn dtype(&self) -> DType {
        self.store.dtype()
    }

    pub fn device(&self) -> &Device {
        self.store.device()
    }

    pub fn module(&self, t: usize) -> &Mccm {
        &self.modules[t - 1]
    }

    /// A copy sharing parameter storage that does not record gradients.
    pub fn inference(&self) -> Result<Self> {
        Self::build(self.config.clone(), self.store.frozen())
    }

    pub fn parameter_count(&self) -> usize {
        self.store.count()
    }

    pub fn forward(&self, image: &Tensor) -> Result<NetworkOutputs> {
        let image = image.to_dtype(self.dtype())?;
        let feats = self.encoder.encode(&image)?;
        let modules = self
            .modules
            .iter()
            .zip(feats.levels.iter())
            .map(|(m, f)| m.forward(f))
            .collect::<Result<Vec<_>>>()?;
        let fused: Vec<Tensor> = modules.iter().map(|m| m.features.clone()).collect();
        let saliency = self.decoder.forward(&fused)?;
        let edges = modules
            .iter()
            .map(|m| m.edge_map.as_ref().map(|a| a.tensor().clone()))
            .collect();
        Ok(NetworkOutputs {
            saliency,
            edges,
            encoder_features: feats.levels,
            modules,
        })
    }

    /// Saliency map for one RGB image in `[0, 1]` (`(3, h, w)` layout) at
    /// the image's own resolution.
    pub fn predict(&self, rgb: &Array3<f32>) -> Result<Array2<f32>> {
        let (c, h, w) = rgb.dim();
        if c != 3 {
            return Err(Error::dim(format!("expected 3 colour planes, got {c}")));
        }
        let n = self.config.input_size;
        let input = crate::data::normalize_rgb(
            &crate::data::resize_rgb(rgb, n, n),
            &self.config.normalization,
        );
        let t = Tensor::from_vec(
            input.into_raw_vec_and_offset().0,
            (1, 3, n, n),
            self.device(),
        )?;
        let frozen = self.inference()?;
        let out = frozen.forward(&t)?;
        let s1: Vec<f32> = out.saliency[0]
            .to_dtype(DType::F32)?
            .flatten_all()?
            .to_vec1()?;
        let map = Array2::from_shape_vec((n, n), s1).expect("S1 has input resolution");
        Ok(resize::bilinear(&map, h, w).mapv(|v| v.clamp(0.0, 1.0)))
    }
}

/// Closed-form parameter count for a configuration, matching
/// [`Network::parameter_count`].
pub fn parameter_count(config: &NetworkConfig) -> usize {
    let conv = |cin: usize, cout: usize, k: usize| k * k * cin * cout + cout;
    let ch = config.channels;
    let m = config.mccm;
    let mut total = encoder_param_count(ch);
    for &c in &ch {
        let fe = m.foreground || m.edge;
        if fe {
            let hidden = reduced_width(c, config.reduction);
            total += (c * hidden + hidden) + (hidden * c + c);
            total += conv(c, c, 3);
        }
        let sa = conv(1, 1, config.spatial_kernel);
        total += sa * (usize::from(m.foreground) + usize::from(m.edge) + usize::from(m.global));
        if m.background {
            total += conv(c, c, 3);
        }
        if m.global {
            total += conv(c, c, 1) + conv(c, c, 3);
        }
        let k = m.branch_count();
        if k > 0 {
            total += conv(k * c, c, 3);
        }
    }
    for t in 0..LEVELS {
        let c = ch[t];
        total += BLOCK_DEPTHS[t] * conv(c, c, 3);
        total += conv(c, 1, 1);
        if t + 1 < LEVELS {
            total += 4 * ch[t + 1] * c + c;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: [usize; 5] = [2, 2, 2, 2, 2];

    #[test]
    fn closed_form_count_matches_built_network() {
        let dev = Device::Cpu;
        for mccm in [
            MccmConfig::FULL,
            MccmConfig::BASELINE,
            MccmConfig {
                background: false,
                ..MccmConfig::FULL
            },
            MccmConfig {
                edge: false,
                background: false,
                ..MccmConfig::FULL
            },
        ] {
            let cfg = NetworkConfig {
                mccm,
                ..NetworkConfig::surrogate([4, 8, 16, 32, 32], 32)
            };
            let net = Network::new(cfg.clone(), DType::F32, &dev, 0).unwrap();
            assert_eq!(
                net.parameter_count(),
                parameter_count(&cfg),
                "{}",
                mccm.label()
            );
        }
    }

    #[test]
    fn side_output_geometry() {
        let dev = Device::Cpu;
        let net = Network::new(NetworkConfig::surrogate(TINY, 32), DType::F32, &dev, 1).unwrap();
        let x = Tensor::randn(0f32, 1.0, (2, 3, 32, 32), &dev).unwrap();
        let out = net.forward(&x).unwrap();
        let sizes: Vec<usize> = out.saliency.iter().map(|s| s.dims()[2]).collect();
        assert_eq!(sizes, vec![32, 16, 8, 4, 2]);
        for s in &out.saliency {
            assert_eq!(s.dims()[0..2], [2, 1]);
        }
        assert!(out.edges.iter().all(Option::is_some));
    }

    #[test]
    fn baseline_has_no_edges_and_fewer_parameters() {
        let dev = Device::Cpu;
        let full = NetworkConfig::surrogate(TINY, 16);
        let base = NetworkConfig {
            mccm: MccmConfig::BASELINE,
            ..full.clone()
        };
        assert!(parameter_count(&base) < parameter_count(&full));
        let net = Network::new(base, DType::F32, &dev, 1).unwrap();
        let out = net
            .forward(&Tensor::zeros((1, 3, 16, 16), DType::F32, &dev).unwrap())
            .unwrap();
        assert!(out.edges.iter().all(Option::is_none));
        assert_eq!(out.saliency.len(), 5);
    }

    #[test]
    fn invalid_sizes_rejected() {
        let cfg = NetworkConfig::surrogate(TINY, 40);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn predict_returns_native_resolution() {
        let dev = Device::Cpu;
        let net = Network::new(NetworkConfig::surrogate(TINY, 16), DType::F32, &dev, 1).unwrap();
        let rgb = Array3::from_shape_fn((3, 21, 13), |(c, y, x)| ((c + y + x) % 7) as f32 / 7.0);
        let s = net.predict(&rgb).unwrap();
        assert_eq!(s.dim(), (21, 13));
        assert!(s.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
