//! Ordered, named parameter store.
//!
//! Keeps `Var`s in insertion order so optimizer updates, checkpoints, and
//! hashes are deterministic. All initialization draws come from an explicit
//! `SeedStream`.

use candle_core::{DType, Device, Tensor, Var};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::rng::SeedStream;

pub struct ParamStore {
    device: Device,
    dtype: DType,
    entries: Vec<(String, Var)>,
}

impl ParamStore {
    pub fn new(device: &Device, dtype: DType) -> Self {
        Self {
            device: device.clone(),
            dtype,
            entries: Vec::new(),
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    fn insert(&mut self, name: &str, values: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(Error::data(format!("duplicate parameter name {name}")));
        }
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let handle = var.as_tensor().clone();
        self.entries.push((name.to_string(), var));
        Ok(handle)
    }

    /// Gaussian-initialized parameter.
    pub fn normal(
        &mut self,
        name: &str,
        shape: &[usize],
        std: f64,
        rng: &mut SeedStream,
    ) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        self.insert(name, rng.normal_vec(n, 0.0, std), shape)
    }

    /// Uniform-initialized parameter in [lo, hi).
    pub fn uniform(
        &mut self,
        name: &str,
        shape: &[usize],
        lo: f64,
        hi: f64,
        rng: &mut SeedStream,
    ) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        self.insert(name, rng.uniform_vec(n, lo, hi), shape)
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        self.insert(name, vec![0.0; n], shape)
    }

    pub fn ones(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        self.insert(name, vec![1.0; n], shape)
    }

    /// Kaiming-style init for a linear layer with `fan_in` inputs.
    pub fn linear_init(
        &mut self,
        name: &str,
        shape: &[usize],
        fan_in: usize,
        rng: &mut SeedStream,
    ) -> Result<Tensor> {
        let std = (2.0 / fan_in as f64).sqrt();
        self.normal(name, shape, std, rng)
    }

    /// Ordered `Var` handles for the optimizer.
    pub fn vars(&self) -> Vec<Var> {
        self.entries.iter().map(|(_, v)| v.clone()).collect()
    }

    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        self.entries
            .iter()
            .map(|(n, v)| (n.clone(), v.as_tensor().clone()))
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_tensor().clone())
    }

    /// Overwrite parameters from named f32 blocks (checkpoint restore).
    /// Every stored parameter must be present with a matching shape.
    pub fn load_blocks(&mut self, blocks: &[(String, Vec<f32>, Vec<usize>)]) -> Result<()> {
        for (name, var) in &self.entries {
            let block = blocks
                .iter()
                .find(|(n, _, _)| n == name)
                .ok_or_else(|| Error::data(format!("checkpoint is missing parameter {name}")))?;
            if var.dims() != block.2.as_slice() {
                return Err(Error::data(format!(
                    "checkpoint shape mismatch for {name}: expected {:?}, found {:?}",
                    var.dims(),
                    block.2
                )));
            }
            let t = Tensor::from_vec(block.1.clone(), block.2.as_slice(), &self.device)?
                .to_dtype(self.dtype)?;
            var.set(&t)?;
        }
        Ok(())
    }

    /// Overwrite a single parameter in place.
    pub fn set(&mut self, name: &str, data: Vec<f32>, shape: &[usize]) -> Result<()> {
        let var = self
            .entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::data(format!("unknown parameter {name}")))?;
        if var.dims() != shape {
            return Err(Error::data(format!(
                "shape mismatch for {name}: expected {:?}, found {:?}",
                var.dims(),
                shape
            )));
        }
        let t = Tensor::from_vec(data, shape, &self.device)?.to_dtype(self.dtype)?;
        var.set(&t)?;
        Ok(())
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.elem_count()).sum()
    }

    /// SHA-256 over parameter names and f32 data, for freeze verification.
    pub fn content_hash(&self) -> Result<[u8; 32]> {
        let mut hasher = Sha256::new();
        for (name, var) in &self.entries {
            hasher.update(name.as_bytes());
            let data: Vec<f32> = var
                .as_tensor()
                .to_dtype(DType::F32)?
                .flatten_all()?
                .to_vec1()?;
            for v in data {
                hasher.update(v.to_le_bytes());
            }
        }
        Ok(hasher.finalize().into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insertion_order_is_preserved() {
        let dev = Device::Cpu;
        let mut rng = SeedStream::new(1);
        let mut store = ParamStore::new(&dev, DType::F32);
        store.normal("b.w", &[2, 2], 1.0, &mut rng).unwrap();
        store.zeros("a.w", &[3]).unwrap();
        let names: Vec<String> = store.named_tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, vec!["b.w".to_string(), "a.w".to_string()]);
    }

    #[test]
    fn duplicate_names_rejected() {
        let dev = Device::Cpu;
        let mut store = ParamStore::new(&dev, DType::F32);
        store.zeros("w", &[1]).unwrap();
        assert!(store.zeros("w", &[1]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let dev = Device::Cpu;
        let mut rng = SeedStream::new(1);
        let mut store = ParamStore::new(&dev, DType::F32);
        store.normal("w", &[4], 1.0, &mut rng).unwrap();
        let h0 = store.content_hash().unwrap();
        let blocks = vec![("w".to_string(), vec![9.0f32, 8.0, 7.0, 6.0], vec![4])];
        store.load_blocks(&blocks).unwrap();
        let h1 = store.content_hash().unwrap();
        assert_ne!(h0, h1);
    }
}
