//! Checkpoints: a safetensors file with the network parameters, optional
//! optimizer moments under `adam.m/` and `adam.v/`, and JSON metadata
//! (`format`, `config`, `epoch`, `step`, `adam`).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, Tensor};

use crate::error::{Error, Result};
use crate::network::{Network, NetworkConfig};
use crate::optim::{Adam, AdamConfig};
use crate::params::ParamStore;

pub const FORMAT: &str = "mccsod-checkpoint/1";
const M_PREFIX: &str = "adam.m/";
const V_PREFIX: &str = "adam.v/";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    pub params: BTreeMap<String, Tensor>,
    pub adam: Option<Adam>,
    pub epoch: usize,
    pub step: usize,
}

impl Checkpoint {
    pub fn dtype(&self) -> DType {
        self.params
            .values()
            .next()
            .map(Tensor::dtype)
            .unwrap_or(DType::F32)
    }

    /// Rebuilds the network; every parameter must be present.
    pub fn network(&self, device: &Device) -> Result<Network> {
        let store = ParamStore::from_tensors(self.params.clone(), self.dtype(), device)?;
        Network::from_store(self.config.clone(), store)
    }
}

pub fn save(
    path: &Path,
    net: &Network,
    adam: Option<&Adam>,
    epoch: usize,
    step: usize,
) -> Result<()> {
    let mut tensors: Vec<(String, Tensor)> = net.store().snapshot()?.into_iter().collect();
    let mut meta = HashMap::new();
    meta.insert("format".to_string(), FORMAT.to_string());
    meta.insert(
        "config".to_string(),
        serde_json::to_string(net.config()).expect("config serializes"),
    );
    meta.insert("epoch".to_string(), epoch.to_string());
    meta.insert("step".to_string(), step.to_string());
    if let Some(adam) = adam {
        let state = serde_json::json!({ "config": adam.config, "step": adam.step_count() });
        meta.insert("adam".to_string(), state.to_string());
        let (m, v) = adam.moments();
        tensors.extend(m.iter().map(|(k, t)| (format!("{M_PREFIX}{k}"), t.clone())));
        tensors.extend(v.iter().map(|(k, t)| (format!("{V_PREFIX}{k}"), t.clone())));
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    safetensors::serialize_to_file(tensors, Some(meta), path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}

fn unreadable(path: &Path, why: impl std::fmt::Display) -> Error {
    Error::State(format!("unreadable checkpoint {}: {why}", path.display()))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| unreadable(path, e))?;
    let (_, header) =
        safetensors::SafeTensors::read_metadata(&bytes).map_err(|e| unreadable(path, e))?;
    let meta = header.metadata().clone().unwrap_or_default();
    if meta.get("format").map(String::as_str) != Some(FORMAT) {
        return Err(unreadable(path, "missing or unknown format tag"));
    }
    let field = |k: &str| {
        meta.get(k)
            .ok_or_else(|| unreadable(path, format!("no `{k}` entry")))
    };
    let config: NetworkConfig =
        serde_json::from_str(field("config")?).map_err(|e| unreadable(path, e))?;
    let epoch = field("epoch")?.parse().map_err(|e| unreadable(path, e))?;
    let step = field("step")?.parse().map_err(|e| unreadable(path, e))?;

    let all = candle_core::safetensors::load_buffer(&bytes, &Device::Cpu)
        .map_err(|e| unreadable(path, e))?;
    let mut params = BTreeMap::new();
    let mut m = BTreeMap::new();
    let mut v = BTreeMap::new();
    for (k, t) in all {
        if let Some(name) = k.strip_prefix(M_PREFIX) {
            m.insert(name.to_string(), t);
        } else if let Some(name) = k.strip_prefix(V_PREFIX) {
            v.insert(name.to_string(), t);
        } else {
            params.insert(k, t);
        }
    }
    let adam = match meta.get("adam") {
        Some(s) => {
            let state: serde_json::Value =
                serde_json::from_str(s).map_err(|e| unreadable(path, e))?;
            let cfg: AdamConfig =
                serde_json::from_value(state["config"].clone()).map_err(|e| unreadable(path, e))?;
            let steps = state["step"]
                .as_u64()
                .ok_or_else(|| unreadable(path, "bad adam step"))?;
            Some(Adam::from_state(cfg, steps as usize, m, v))
        }
        None => None,
    };
    Ok(Checkpoint {
        config,
        params,
        adam,
        epoch,
        step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.safetensors");
        let cfg = NetworkConfig::surrogate([2, 2, 4, 4, 4], 16);
        let net = Network::new(cfg, DType::F64, &Device::Cpu, 3).unwrap();
        save(&path, &net, None, 2, 17).unwrap();
        let ck = load(&path).unwrap();
        assert_eq!((ck.epoch, ck.step), (2, 17));
        let back = ck.network(&Device::Cpu).unwrap();
        let x = Tensor::randn(0f64, 1.0, (1, 3, 16, 16), &Device::Cpu).unwrap();
        let a: Vec<f64> = net.forward(&x).unwrap().saliency[0]
            .flatten_all()
            .unwrap()
            .to_vec1()
            .unwrap();
        let b: Vec<f64> = back.forward(&x).unwrap().saliency[0]
            .flatten_all()
            .unwrap()
            .to_vec1()
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn garbage_is_a_state_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.safetensors");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(load(&path), Err(Error::State(_))));
        assert!(matches!(
            load(&dir.path().join("absent")),
            Err(Error::State(_))
        ));
    }
}
