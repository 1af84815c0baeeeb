//! Channel and spatial attention.
//!
//! Channel attention squeezes each channel to its spatial maximum, passes the
//! vector through two fully connected layers (`c -> c/r -> c`, no activation
//! between them) and a sigmoid. Spatial attention takes the per-pixel maximum over channels
//! and maps the resulting single-channel image through one convolution and a
//! sigmoid.

use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::layers::{sigmoid, Conv2d, Dense};
use crate::params::ParamStore;

pub const DEFAULT_REDUCTION: usize = 16;
pub const DEFAULT_SPATIAL_KERNEL: usize = 7;

/// Closed interval an [`AttentionMap`] is declared to live in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueRange {
    pub lo: f64,
    pub hi: f64,
}

impl ValueRange {
    pub const UNIT: ValueRange = ValueRange { lo: 0.0, hi: 1.0 };
    pub const DOUBLE: ValueRange = ValueRange { lo: 0.0, hi: 2.0 };
    pub const SIGNED: ValueRange = ValueRange { lo: -1.0, hi: 1.0 };
}

/// Per-sample, per-channel weights in `(0, 1)`, shape `(batch, channels)`.
#[derive(Debug, Clone)]
pub struct ChannelWeights(Tensor);

impl ChannelWeights {
    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn channels(&self) -> usize {
        self.0.dims()[1]
    }
}

/// Single-channel map `(batch, 1, h, w)` with a declared value range.
#[derive(Debug, Clone)]
pub struct AttentionMap {
    values: Tensor,
    range: ValueRange,
}

impl AttentionMap {
    pub fn new(values: Tensor, range: ValueRange) -> Result<Self> {
        let dims = values.dims();
        if dims.len() != 4 || dims[1] != 1 {
            return Err(Error::dim(format!(
                "attention map must be (batch, 1, h, w), got {dims:?}"
            )));
        }
        Ok(Self { values, range })
    }

    pub fn tensor(&self) -> &Tensor {
        &self.values
    }

    pub fn into_tensor(self) -> Tensor {
        self.values
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    /// Smallest and largest element.
    pub fn extrema(&self) -> Result<(f64, f64)> {
        let flat = self.values.flatten_all()?;
        let lo = flat
            .min(0)?
            .to_dtype(candle_core::DType::F64)?
            .to_scalar()?;
        let hi = flat
            .max(0)?
            .to_dtype(candle_core::DType::F64)?
            .to_scalar()?;
        Ok((lo, hi))
    }

    pub fn check_range(&self) -> Result<()> {
        let (lo, hi) = self.extrema()?;
        if lo < self.range.lo || hi > self.range.hi || lo.is_nan() || hi.is_nan() {
            return Err(Error::Contract(format!(
                "attention map values [{lo}, {hi}] outside [{}, {}]",
                self.range.lo, self.range.hi
            )));
        }
        Ok(())
    }
}

/// Parameters of one channel-attention block.
#[derive(Clone, Debug)]
pub struct ChannelAttention {
    fc1: Dense,
    fc2: Dense,
    channels: usize,
}

/// Hidden width of the squeeze layer, never below one.
pub fn reduced_width(channels: usize, reduction: usize) -> usize {
    (channels / reduction.max(1)).max(1)
}

impl ChannelAttention {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        channels: usize,
        reduction: usize,
    ) -> Result<Self> {
        let hidden = reduced_width(channels, reduction);
        Ok(Self {
            fc1: Dense::new(store, &format!("{name}.fc1"), channels, hidden)?,
            fc2: Dense::new(store, &format!("{name}.fc2"), hidden, channels)?,
            channels,
        })
    }

    pub fn weights(&self, f: &Tensor) -> Result<ChannelWeights> {
        let (b, c, h, w) = f.dims4()?;
        if c != self.channels {
            return Err(Error::dim(format!(
                "channel attention built for {} channels, input has {c}",
                self.channels
            )));
        }
        let pooled = f.reshape((b, c, h * w))?.max(2)?;
        let hidden = self.fc1.forward(&pooled)?;
        let out = sigmoid(&self.fc2.forward(&hidden)?)?;
        Ok(ChannelWeights(out))
    }
}

/// `out[b, c, y, x] = f[b, c, y, x] * w[b, c]`.
pub fn apply_channel_weights(f: &Tensor, w: &ChannelWeights) -> Result<Tensor> {
    let (b, c, _, _) = f.dims4()?;
    let wd = w.tensor().dims();
    if wd != [b, c] {
        return Err(Error::dim(format!(
            "channel weights {wd:?} do not match features ({b}, {c}, ..)"
        )));
    }
    Ok(f.broadcast_mul(&w.tensor().reshape((b, c, 1, 1))?)?)
}

/// Parameters of one spatial-attention block.
#[derive(Clone, Debug)]
pub struct SpatialAttention {
    conv: Conv2d,
}

impl SpatialAttention {
    pub fn new(store: &mut ParamStore, name: &str, kernel: usize) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "spatial attention kernel must be odd, got {kernel}"
            )));
        }
        Ok(Self {
            conv: Conv2d::new(store, &format!("{name}.conv"), 1, 1, kernel)?,
        })
    }

    pub fn map(&self, f: &Tensor) -> Result<AttentionMap> {
        f.dims4()?;
        let pooled = f.max_keepdim(1)?;
        let out = sigmoid(&self.conv.forward(&pooled)?)?;
        AttentionMap::new(out, ValueRange::UNIT)
    }
}
