//! Named parameter storage.
//!
//! Every learnable tensor of the network lives in a [`ParamStore`] under a
//! dotted name (`enc.b1.c1.weight`, `mccm3.fuse.bias`, ...). Layers request
//! their tensors through [`ParamStore::fetch`]; depending on the store's
//! [`Missing`] policy an absent name is either initialized from the store's
//! seeded generator or reported as [`Error::MissingWeight`].

use std::collections::BTreeMap;

use candle_core::{DType, Device, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// How a tensor that is not yet in the store gets its initial value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    /// Zero-mean normal with the given standard deviation.
    Normal(f64),
    /// He-normal, `std = sqrt(2 / fan_in)`.
    Kaiming {
        fan_in: usize,
    },
}

/// Policy for names requested but not present.
#[derive(Debug, Clone)]
pub enum Missing {
    /// Draw a fresh value from the seeded generator.
    Initialize,
    /// Refuse: every requested tensor must already exist.
    Error,
}

/// Cloning shares the underlying variables.
#[derive(Clone)]
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
    dtype: DType,
    device: Device,
    missing: Missing,
    rng: ChaCha8Rng,
    frozen: bool,
}

impl ParamStore {
    pub fn new(dtype: DType, device: &Device, seed: u64) -> Self {
        Self {
            vars: BTreeMap::new(),
            dtype,
            device: device.clone(),
            missing: Missing::Initialize,
            rng: ChaCha8Rng::seed_from_u64(seed),
            frozen: false,
        }
    }

    /// A store pre-filled with `tensors` (converted to `dtype`) that refuses
    /// to invent anything it does not hold.
    pub fn from_tensors(
        tensors: impl IntoIterator<Item = (String, Tensor)>,
        dtype: DType,
        device: &Device,
    ) -> Result<Self> {
        let mut store = Self::new(dtype, device, 0);
        store.missing = Missing::Error;
        for (name, t) in tensors {
            store.insert(&name, &t)?;
        }
        Ok(store)
    }

    pub fn set_missing(&mut self, missing: Missing) {
        self.missing = missing;
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Inserts or replaces a tensor by name.
    pub fn insert(&mut self, name: &str, t: &Tensor) -> Result<()> {
        let t = t
            .to_dtype(self.dtype)?
            .to_device(&self.device)?
            .contiguous()?;
        match self.vars.get(name) {
            Some(var) if var.dims() == t.dims() => var.set(&t.copy()?)?,
            _ => {
                self.vars.insert(name.to_string(), Var::from_tensor(&t)?);
            }
        }
        Ok(())
    }

    /// Overwrites an existing tensor in place; every layer holding it sees
    /// the new value.
    pub fn assign(&self, name: &str, t: &Tensor) -> Result<()> {
        let var = self
            .vars
            .get(name)
            .ok_or_else(|| Error::MissingWeight(name.to_string()))?;
        if var.dims() != t.dims() {
            return Err(Error::dim(format!(
                "`{name}`: expected shape {:?}, got {:?}",
                var.dims(),
                t.dims()
            )));
        }
        var.set(&t.to_dtype(self.dtype)?.contiguous()?)?;
        Ok(())
    }

    /// Returns the tensor called `name`, creating it per the [`Missing`]
    /// policy. An existing tensor of the wrong shape is a dimension error.
    pub fn fetch(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Tensor> {
        if let Some(var) = self.vars.get(name) {
            if var.dims() != shape {
                return Err(Error::dim(format!(
                    "`{name}`: expected shape {shape:?}, found {:?}",
                    var.dims()
                )));
            }
            return Ok(self.view(var));
        }
        if let Missing::Error = self.missing {
            return Err(Error::MissingWeight(name.to_string()));
        }
        let n: usize = shape.iter().product();
        let std = match init {
            Init::Zeros => 0.0,
            Init::Normal(std) => std,
            Init::Kaiming { fan_in } => (2.0 / fan_in.max(1) as f64).sqrt(),
        };
        let values: Vec<f64> = if std == 0.0 {
            vec![0.0; n]
        } else {
            let normal = Normal::new(0.0, std).expect("finite std");
            (0..n).map(|_| normal.sample(&mut self.rng)).collect()
        };
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let out = self.view(&var);
        self.vars.insert(name.to_string(), var);
        Ok(out)
    }

    fn view(&self, var: &Var) -> Tensor {
        if self.frozen {
            var.as_detached_tensor()
        } else {
            var.as_tensor().clone()
        }
    }

    /// A store sharing storage with `self` whose tensors do not record
    /// gradients. Layers built from it are suited to inference.
    pub fn frozen(&self) -> Self {
        Self {
            vars: self.vars.clone(),
            dtype: self.dtype,
            device: self.device.clone(),
            missing: Missing::Error,
            rng: self.rng.clone(),
            frozen: true,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    pub fn vars(&self) -> impl Iterator<Item = (&str, &Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Total scalar count over all tensors whose name starts with `prefix`.
    pub fn count_with_prefix(&self, prefix: &str) -> usize {
        self.vars
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v.elem_count())
            .sum()
    }

    pub fn count(&self) -> usize {
        self.count_with_prefix("")
    }

    /// Detached copies of every tensor, keyed by name.
    pub fn snapshot(&self) -> Result<BTreeMap<String, Tensor>> {
        self.vars
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.as_detached_tensor().copy()?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_values() {
        let dev = Device::Cpu;
        let mut a = ParamStore::new(DType::F32, &dev, 7);
        let mut b = ParamStore::new(DType::F32, &dev, 7);
        let ta = a.fetch("w", &[3, 4], Init::Normal(1.0)).unwrap();
        let tb = b.fetch("w", &[3, 4], Init::Normal(1.0)).unwrap();
        let va: Vec<f32> = ta.flatten_all().unwrap().to_vec1().unwrap();
        let vb: Vec<f32> = tb.flatten_all().unwrap().to_vec1().unwrap();
        assert_eq!(va, vb);
    }

    #[test]
    fn strict_store_reports_missing_and_mismatch() {
        let dev = Device::Cpu;
        let t = Tensor::zeros((2, 2), DType::F32, &dev).unwrap();
        let mut s = ParamStore::from_tensors([("a".to_string(), t)], DType::F32, &dev).unwrap();
        assert!(matches!(
            s.fetch("b", &[2, 2], Init::Zeros),
            Err(Error::MissingWeight(_))
        ));
        assert!(matches!(
            s.fetch("a", &[4], Init::Zeros),
            Err(Error::Dimension(_))
        ));
        assert!(s.fetch("a", &[2, 2], Init::Zeros).is_ok());
    }

    #[test]
    fn assign_is_visible_through_fetched_views() {
        let dev = Device::Cpu;
        let mut s = ParamStore::new(DType::F64, &dev, 0);
        let view = s.fetch("w", &[2], Init::Zeros).unwrap();
        let frozen = s.frozen();
        s.assign("w", &Tensor::new(&[1.5f64, -2.0], &dev).unwrap())
            .unwrap();
        assert_eq!(view.to_vec1::<f64>().unwrap(), vec![1.5, -2.0]);
        let mut frozen = frozen;
        let fv = frozen.fetch("w", &[2], Init::Zeros).unwrap();
        assert_eq!(fv.to_vec1::<f64>().unwrap(), vec![1.5, -2.0]);
    }
}
