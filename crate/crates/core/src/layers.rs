//! Small differentiable building blocks on top of candle tensors.

use candle_core::{DType, Device, Tensor, D};

use crate::error::{Error, Result};
use crate::params::{Init, ParamStore};
use crate::resize::bilinear_matrix;

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(candle_nn::ops::sigmoid(x)?)
}

/// Square-kernel convolution with bias, stride 1.
#[derive(Clone, Debug)]
pub struct Conv2d {
    weight: Tensor,
    bias: Tensor,
    padding: usize,
}

impl Conv2d {
    /// Registers `{name}.weight` `(out, in, k, k)` and `{name}.bias` `(out)`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    ) -> Result<Self> {
        let weight = store.fetch(
            &format!("{name}.weight"),
            &[out_channels, in_channels, kernel, kernel],
            Init::Kaiming {
                fan_in: in_channels * kernel * kernel,
            },
        )?;
        let bias = store.fetch(&format!("{name}.bias"), &[out_channels], Init::Zeros)?;
        Ok(Self {
            weight,
            bias,
            padding: kernel / 2,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let c = x.dim(1)?;
        if c != self.in_channels() {
            return Err(Error::dim(format!(
                "convolution expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        let y = x.conv2d(&self.weight, self.padding, 1, 1, 1)?;
        let b = self.bias.reshape((1, self.out_channels(), 1, 1))?;
        Ok(y.broadcast_add(&b)?)
    }
}

/// Fully connected layer on `(batch, features)` inputs.
#[derive(Clone, Debug)]
pub struct Dense {
    weight: Tensor,
    bias: Tensor,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize) -> Result<Self> {
        let weight = store.fetch(
            &format!("{name}.weight"),
            &[outputs, inputs],
            Init::Kaiming { fan_in: inputs },
        )?;
        let bias = store.fetch(&format!("{name}.bias"), &[outputs], Init::Zeros)?;
        Ok(Self { weight, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.dim(D::Minus1)? != self.inputs() {
            return Err(Error::dim(format!(
                "dense layer expects {} features, got {}",
                self.inputs(),
                x.dim(D::Minus1)?
            )));
        }
        Ok(x.matmul(&self.weight.t()?)?.broadcast_add(&self.bias)?)
    }
}

/// Transposed convolution with a 2x2 kernel and stride 2: every input pixel
/// expands to a disjoint 2x2 output patch, so the layer is one matrix
/// product followed by a pixel shuffle.
#[derive(Clone, Debug)]
pub struct Upsample2x {
    /// `(in, out, 2, 2)`, the usual transposed-convolution layout.
    weight: Tensor,
    bias: Tensor,
}

impl Upsample2x {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
    ) -> Result<Self> {
        let weight = store.fetch(
            &format!("{name}.weight"),
            &[in_channels, out_channels, 2, 2],
            Init::Kaiming {
                fan_in: in_channels,
            },
        )?;
        let bias = store.fetch(&format!("{name}.bias"), &[out_channels], Init::Zeros)?;
        Ok(Self { weight, bias })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (b, c, h, w) = x.dims4()?;
        let (cin, cout) = (self.weight.dims()[0], self.weight.dims()[1]);
        if c != cin {
            return Err(Error::dim(format!(
                "transposed convolution expects {cin} channels, got {c}"
            )));
        }
        let rows = x.permute((0, 2, 3, 1))?.reshape((b * h * w, c))?;
        let kernel = self.weight.reshape((cin, cout * 4))?;
        let y = rows
            .matmul(&kernel)?
            .reshape((b, h, w, cout, 2, 2))?
            .permute((0, 3, 1, 4, 2, 5))?
            .reshape((b, cout, 2 * h, 2 * w))?;
        Ok(y.broadcast_add(&self.bias.reshape((1, cout, 1, 1))?)?)
    }
}

/// Differentiable bilinear resize of a `(b, c, h, w)` tensor to
/// `(b, c, height, width)`, half-pixel convention.
pub fn upsample_bilinear(x: &Tensor, height: usize, width: usize) -> Result<Tensor> {
    let (_, _, h, w) = x.dims4()?;
    if (h, w) == (height, width) {
        return Ok(x.clone());
    }
    let dev = x.device();
    let ry = interp(h, height, x.dtype(), dev)?;
    let rx = interp(w, width, x.dtype(), dev)?.t()?;
    let y = x.broadcast_matmul(&rx)?;
    Ok(ry.broadcast_matmul(&y)?)
}

fn interp(input: usize, output: usize, dtype: DType, dev: &Device) -> Result<Tensor> {
    Ok(Tensor::from_vec(bilinear_matrix(input, output), (output, input), dev)?.to_dtype(dtype)?)
}
