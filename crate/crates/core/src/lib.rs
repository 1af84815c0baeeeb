//! Saliency maps for aerial and satellite images: a VGG-style encoder,
//! attention modules that mix foreground, edge, background and global cues,
//! and a deeply supervised decoder, plus the tools to train and score them.

pub mod ablation;
pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod encoder;
pub mod error;
pub mod layers;
pub mod losses;
pub mod mccm;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod params;
pub mod resize;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use network::{Network, NetworkConfig, NetworkOutputs};
