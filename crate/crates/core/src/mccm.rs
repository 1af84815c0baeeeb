//! Multi-content complementation module.
//!
//! For a basic feature map `f_e` of one encoder level:
//!
//! ```text
//! f_ca = CA(f_e) * f_e                     channel-purified features
//! a_f  = SA_fg(f_ca),  a_e = SA_edge(f_ca) foreground / edge maps in (0, 1)
//! a_fe = a_f + a_e                         foreground-edge map in (0, 2)
//! a_b  = 1 - a_fe                          background map in (-1, 1)
//! a_g  = SA_g(up(conv1x1(GAP(f_e))))       global image-level map in (0, 1)
//! f_fe = a_fe * f_ca,  f_b = a_b * f_ca,  f_g = a_g * f_e
//! out  = ReLU(conv3x3([P_fe(f_fe), P_b(f_b), P_g(f_g)])) + f_e
//! ```
//!
//! where each `P_*` is a 3x3 `c -> c` convolution with ReLU. Disabled
//! branches are dropped from the concatenation and own no parameters. With
//! only one of foreground/edge enabled, `a_fe` is that single map.

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::attention::{
    apply_channel_weights, AttentionMap, ChannelAttention, SpatialAttention, ValueRange,
};
use crate::error::{Error, Result};
use crate::layers::Conv2d;
use crate::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MccmConfig {
    pub foreground: bool,
    pub edge: bool,
    pub background: bool,
    pub global: bool,
    pub short_connection: bool,
}

impl Default for MccmConfig {
    fn default() -> Self {
        Self::FULL
    }
}

impl MccmConfig {
    pub const FULL: MccmConfig = MccmConfig {
        foreground: true,
        edge: true,
        background: true,
        global: true,
        short_connection: true,
    };

    /// Every branch off: the module reduces to the identity skip.
    pub const BASELINE: MccmConfig = MccmConfig {
        foreground: false,
        edge: false,
        background: false,
        global: false,
        short_connection: true,
    };

    pub fn validate(&self) -> Result<()> {
        if self.background && !(self.foreground || self.edge) {
            return Err(Error::Config(
                "background branch needs the foreground or edge branch".into(),
            ));
        }
        if self.branch_count() == 0 && !self.short_connection {
            return Err(Error::Config(
                "module with no branches and no short connection has no output".into(),
            ));
        }
        Ok(())
    }

    fn has_foreground_edge(&self) -> bool {
        self.foreground || self.edge
    }

    /// Number of feature maps entering the fusion convolution.
    pub fn branch_count(&self) -> usize {
        usize::from(self.has_foreground_edge())
            + usize::from(self.background)
            + usize::from(self.global)
    }

    /// Short human label, e.g. `FG+EG+BG+GIC`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.foreground {
            parts.push("FG");
        }
        if self.edge {
            parts.push("EG");
        }
        if self.background {
            parts.push("BG");
        }
        if self.global {
            parts.push("GIC");
        }
        let mut s = if parts.is_empty() {
            "Baseline".to_string()
        } else {
            format!("Baseline+{}", parts.join("+"))
        };
        if !self.short_connection {
            s.push_str(" w/o original content");
        }
        s
    }
}

/// Attention maps produced on the way, kept for inspection.
#[derive(Debug, Clone, Default)]
pub struct MccmTrace {
    pub foreground: Option<AttentionMap>,
    pub foreground_edge: Option<AttentionMap>,
    pub background: Option<AttentionMap>,
    pub global: Option<AttentionMap>,
}

#[derive(Debug, Clone)]
pub struct MccmOutputs {
    /// Same shape as the input features.
    pub features: Tensor,
    /// Present when the edge branch is enabled.
    pub edge_map: Option<AttentionMap>,
    pub trace: MccmTrace,
}

#[derive(Clone, Debug)]
pub struct Mccm {
    config: MccmConfig,
    channels: usize,
    channel_attention: Option<ChannelAttention>,
    sa_foreground: Option<SpatialAttention>,
    sa_edge: Option<SpatialAttention>,
    global_conv: Option<Conv2d>,
    sa_global: Option<SpatialAttention>,
    polish_fe: Option<Conv2d>,
    polish_bg: Option<Conv2d>,
    polish_g: Option<Conv2d>,
    fuse: Option<Conv2d>,
}

impl Mccm {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        channels: usize,
        config: MccmConfig,
        reduction: usize,
        spatial_kernel: usize,
    ) -> Result<Self> {
        config.validate()?;
        let p = |s: &str| format!("{name}.{s}");
        let c = channels;
        let fe = config.has_foreground_edge();
        let channel_attention = fe
            .then(|| ChannelAttention::new(store, &p("ca"), c, reduction))
            .transpose()?;
        let sa_foreground = config
            .foreground
            .then(|| SpatialAttention::new(store, &p("sa_fg"), spatial_kernel))
            .transpose()?;
        let sa_edge = config
            .edge
            .then(|| SpatialAttention::new(store, &p("sa_edge"), spatial_kernel))
            .transpose()?;
        let global_conv = config
            .global
            .then(|| Conv2d::new(store, &p("gic.conv"), c, c, 1))
            .transpose()?;
        let sa_global = config
            .global
            .then(|| SpatialAttention::new(store, &p("gic.sa"), spatial_kernel))
            .transpose()?;
        let polish_fe = fe
            .then(|| Conv2d::new(store, &p("polish_fe"), c, c, 3))
            .transpose()?;
        let polish_bg = config
            .background
            .then(|| Conv2d::new(store, &p("polish_bg"), c, c, 3))
            .transpose()?;
        let polish_g = config
            .global
            .then(|| Conv2d::new(store, &p("polish_g"), c, c, 3))
            .transpose()?;
        let k = config.branch_count();
        let fuse = (k > 0)
            .then(|| Conv2d::new(store, &p("fuse"), k * c, c, 3))
            .transpose()?;
        Ok(Self {
            config,
            channels,
            channel_attention,
            sa_foreground,
            sa_edge,
            global_conv,
            sa_global,
            polish_fe,
            polish_bg,
            polish_g,
            fuse,
        })
    }

    pub fn config(&self) -> MccmConfig {
        self.config
    }

    fn check_input(&self, f_e: &Tensor) -> Result<()> {
        let (_, c, _, _) = f_e.dims4()?;
        if c != self.channels {
            return Err(Error::dim(format!(
                "module built for {} channels, input has {c}",
                self.channels
            )));
        }
        Ok(())
    }

    /// Channel-attention purification `f_ca = CA(f_e) * f_e`.
    pub fn purify(&self, f_e: &Tensor) -> Result<Tensor> {
        self.check_input(f_e)?;
        let ca = self.channel_attention.as_ref().ok_or_else(|| {
            Error::Config("purification needs the foreground or edge branch".into())
        })?;
        apply_channel_weights(f_e, &ca.weights(f_e)?)
    }

    /// `SA(up(conv1x1(GAP(f_e))))`, spatially resized to `f_e`.
    pub fn global_image_map(&self, f_e: &Tensor) -> Result<AttentionMap> {
        self.check_input(f_e)?;
        let (conv, sa) = match (&self.global_conv, &self.sa_global) {
            (Some(c), Some(s)) => (c, s),
            _ => return Err(Error::Config("global branch is disabled".into())),
        };
        let (b, c, h, w) = f_e.dims4()?;
        let pooled = f_e.mean_keepdim(3)?.mean_keepdim(2)?;
        let smoothed = conv.forward(&pooled)?;
        // bilinear upsampling of a 1x1 map is a constant broadcast
        let restored = smoothed.broadcast_as((b, c, h, w))?;
        sa.map(&restored)
    }

    pub fn forward(&self, f_e: &Tensor) -> Result<MccmOutputs> {
        self.check_input(f_e)?;
        let mut trace = MccmTrace::default();
        let mut edge_map = None;
        let mut branches: Vec<Tensor> = Vec::with_capacity(3);

        if self.config.has_foreground_edge() {
            let f_ca = self.purify(f_e)?;
            let a_f = self
                .sa_foreground
                .as_ref()
                .map(|sa| sa.map(&f_ca))
                .transpose()?;
            let a_e = self.sa_edge.as_ref().map(|sa| sa.map(&f_ca)).transpose()?;
            let a_fe = foreground_edge_map(a_f.as_ref(), a_e.as_ref())?;
            let f_fe = a_fe.tensor().broadcast_mul(&f_ca)?;
            branches.push(conv_relu(self.polish_fe.as_ref(), &f_fe)?);

            if let Some(polish) = &self.polish_bg {
                let a_b = background_map(&a_fe)?;
                let f_b = a_b.tensor().broadcast_mul(&f_ca)?;
                branches.push(conv_relu(Some(polish), &f_b)?);
                trace.background = Some(a_b);
            }
            trace.foreground = a_f;
            trace.foreground_edge = Some(a_fe);
            edge_map = a_e;
        }

        if self.config.global {
            let a_g = self.global_image_map(f_e)?;
            let f_g = a_g.tensor().broadcast_mul(f_e)?;
            branches.push(conv_relu(self.polish_g.as_ref(), &f_g)?);
            trace.global = Some(a_g);
        }

        let features = match &self.fuse {
            Some(fuse) => {
                let cat = Tensor::cat(&branches, 1)?;
                let fused = fuse.forward(&cat)?.relu()?;
                if self.config.short_connection {
                    (fused + f_e)?
                } else {
                    fused
                }
            }
            None => f_e.clone(),
        };
        Ok(MccmOutputs {
            features,
            edge_map,
            trace,
        })
    }
}

fn conv_relu(conv: Option<&Conv2d>, x: &Tensor) -> Result<Tensor> {
    let conv = conv.expect("polishing convolution exists for every enabled branch");
    Ok(conv.forward(x)?.relu()?)
}

/// Element-wise sum of the foreground and edge maps; a single present map
/// is passed through.
pub fn foreground_edge_map(
    a_f: Option<&AttentionMap>,
    a_e: Option<&AttentionMap>,
) -> Result<AttentionMap> {
    match (a_f, a_e) {
        (Some(f), Some(e)) => {
            if f.tensor().dims() != e.tensor().dims() {
                return Err(Error::dim(format!(
                    "foreground map {:?} and edge map {:?} differ in shape",
                    f.tensor().dims(),
                    e.tensor().dims()
                )));
            }
            AttentionMap::new((f.tensor() + e.tensor())?, ValueRange::DOUBLE)
        }
        (Some(m), None) | (None, Some(m)) => {
            AttentionMap::new(m.tensor().clone(), ValueRange::DOUBLE)
        }
        (None, None) => Err(Error::Config(
            "foreground-edge map needs at least one input map".into(),
        )),
    }
}

/// Reverse attention `a_b = 1 - a_fe`.
pub fn background_map(a_fe: &AttentionMap) -> Result<AttentionMap> {
    if cfg!(debug_assertions) {
        let (lo, hi) = a_fe.extrema()?;
        if lo < 0.0 || hi > 2.0 || lo.is_nan() || hi.is_nan() {
            return Err(Error::Contract(format!(
                "foreground-edge map values [{lo}, {hi}] outside [0, 2]"
            )));
        }
    }
    AttentionMap::new(a_fe.tensor().affine(-1.0, 1.0)?, ValueRange::SIGNED)
}
