//! Run configuration files (TOML).
//!
//! ```toml
//! precision = "f32"
//!
//! [network]
//! input_size = 256
//! channels = [64, 128, 256, 512, 512]
//!
//! [network.mccm]
//! background = false
//!
//! [train]
//! epochs = 39
//! initial_lr = 1e-4
//!
//! [train.loss]
//! use_fmeasure = false
//!
//! [data.edge]
//! width = 1
//! mode = "inner"
//!
//! [eval]
//! skip_empty_gt = false
//! ```
//!
//! Every key is optional. Command-line flags are applied on top of the file
//! and the resolved result is written next to the run's outputs.

use std::path::{Path, PathBuf};

use candle_core::DType;
use serde::{Deserialize, Serialize};

use crate::data::{EdgeConfig, PrepareConfig};
use crate::error::{Error, Result};
use crate::metrics::EvalOptions;
use crate::network::NetworkConfig;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn dtype(self) -> DType {
        match self {
            Precision::F32 => DType::F32,
            Precision::F64 => DType::F64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    pub edge: EdgeConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub precision: Precision,
    /// Pretrained encoder archive; required when the network asks for one.
    pub pretrained: Option<PathBuf>,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub data: DataSection,
    pub eval: EvalOptions,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    pub fn prepare(&self) -> PrepareConfig {
        PrepareConfig {
            size: self.network.input_size,
            normalization: self.network.normalization,
            edge: self.data.edge,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.train.validate()?;
        if self.data.edge.width == 0 {
            return Err(Error::Config("edge width must be at least 1".into()));
        }
        Ok(())
    }
}
