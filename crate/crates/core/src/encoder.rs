//! Truncated VGG-16 feature extractor.
//!
//! Thirteen 3x3 convolutions (padding 1, each followed by ReLU) grouped in
//! five blocks of depth 2, 2, 3, 3, 3. A 2x2 stride-2 max-pool separates
//! consecutive blocks; there is none after the last block and no classifier
//! head. Level `t` therefore has spatial size `input / 2^(t-1)`.
//!
//! Weight names follow `enc.b{block}.c{conv}.{weight,bias}` with 1-based
//! indices, kernels in `(out, in, 3, 3)` layout. A pretrained archive is a
//! safetensors file holding exactly these names (extra entries are ignored);
//! `scripts/convert_vgg16.py` produces one from a torchvision checkpoint.

use std::collections::BTreeMap;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::Conv2d;
use crate::params::ParamStore;

pub const VGG16_CHANNELS: [usize; 5] = [64, 128, 256, 512, 512];
pub const BLOCK_DEPTHS: [usize; 5] = [2, 2, 3, 3, 3];
pub const LEVELS: usize = 5;

/// Per-channel input normalization, `(x - mean) / std` on `[0, 1]` RGB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Normalization {
    /// Statistics the public VGG-16 weights were trained with.
    pub const IMAGENET: Normalization = Normalization {
        mean: [0.485, 0.456, 0.406],
        std: [0.229, 0.224, 0.225],
    };
    /// Maps `[0, 1]` to `[-1, 1]`; used with random initialization.
    pub const HALF: Normalization = Normalization {
        mean: [0.5, 0.5, 0.5],
        std: [0.5, 0.5, 0.5],
    };
}

pub fn conv_name(block: usize, conv: usize) -> String {
    format!("enc.b{block}.c{conv}")
}

/// Scalar parameter count of the encoder for a channel plan:
/// `sum over layers of 9 * c_in * c_out + c_out`.
pub fn encoder_param_count(channels: [usize; 5]) -> usize {
    let mut total = 0;
    let mut c_in = 3;
    for (&c_out, &depth) in channels.iter().zip(BLOCK_DEPTHS.iter()) {
        for _ in 0..depth {
            total += 9 * c_in * c_out + c_out;
            c_in = c_out;
        }
    }
    total
}

/// The five basic feature maps, finest first.
#[derive(Debug, Clone)]
pub struct EncoderFeatures {
    pub levels: Vec<Tensor>,
}

#[derive(Clone, Debug)]
pub struct Encoder {
    blocks: Vec<Vec<Conv2d>>,
    input_size: usize,
}

impl Encoder {
    pub fn new(store: &mut ParamStore, channels: [usize; 5], input_size: usize) -> Result<Self> {
        let mut blocks = Vec::with_capacity(LEVELS);
        let mut c_in = 3;
        for (b, (&c_out, &depth)) in channels.iter().zip(BLOCK_DEPTHS.iter()).enumerate() {
            let mut convs = Vec::with_capacity(depth);
            for c in 0..depth {
                convs.push(Conv2d::new(
                    store,
                    &conv_name(b + 1, c + 1),
                    c_in,
                    c_out,
                    3,
                )?);
                c_in = c_out;
            }
            blocks.push(convs);
        }
        Ok(Self { blocks, input_size })
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn encode(&self, image: &Tensor) -> Result<EncoderFeatures> {
        let (_, c, h, w) = image.dims4()?;
        if c != 3 || h != self.input_size || w != self.input_size {
            return Err(Error::dim(format!(
                "encoder expects (batch, 3, {s}, {s}) input, got {:?}",
                image.dims(),
                s = self.input_size
            )));
        }
        let mut levels = Vec::with_capacity(LEVELS);
        let mut x = image.clone();
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                x = x.max_pool2d(2)?;
            }
            for conv in block {
                x = conv.forward(&x)?.relu()?;
            }
            levels.push(x.clone());
        }
        Ok(EncoderFeatures { levels })
    }
}

/// A validated set of pretrained encoder tensors.
#[derive(Debug, Clone)]
pub struct EncoderParams {
    tensors: BTreeMap<String, Tensor>,
}

impl EncoderParams {
    /// Keeps the 26 encoder entries of `tensors` after checking every one is
    /// present and shaped for `channels`.
    pub fn from_tensors(
        tensors: impl IntoIterator<Item = (String, Tensor)>,
        channels: [usize; 5],
    ) -> Result<Self> {
        let wanted: BTreeMap<String, Tensor> = tensors
            .into_iter()
            .filter(|(k, _)| k.starts_with("enc."))
            .collect();
        let mut strict = ParamStore::from_tensors(wanted.clone(), DType::F32, &Device::Cpu)?;
        // any input size works for validation; shapes do not depend on it
        Encoder::new(&mut strict, channels, 16)?;
        Ok(Self { tensors: wanted })
    }

    pub fn param_count(&self) -> usize {
        self.tensors.values().map(Tensor::elem_count).sum()
    }

    /// Copies the tensors into `store`, overwriting same-named entries.
    pub fn install(&self, store: &mut ParamStore) -> Result<()> {
        for (k, t) in &self.tensors {
            store.insert(k, t)?;
        }
        Ok(())
    }
}

/// Reads a pretrained VGG-16 archive (see module docs for the layout).
pub fn load_pretrained(path: &Path, channels: [usize; 5]) -> Result<EncoderParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let tensors = candle_core::safetensors::load_buffer(&bytes, &Device::Cpu)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    EncoderParams::from_tensors(tensors, channels)
}
