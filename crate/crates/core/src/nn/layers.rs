//! Layer building blocks used by the encoders, the anchor, and the
//! transformer. Thin wrappers over candle tensors; parameters live in a
//! `ParamStore`.

use candle_core::{Tensor, D};

use crate::error::Result;
use crate::nn::params::ParamStore;
use crate::nn::rng::SeedStream;

/// Affine layer `x W + b`. Works on inputs of rank 2 or 3 (leading batch
/// dims broadcast against the 2-D weight).
#[derive(Clone)]
pub struct Linear {
    pub w: Tensor, // (in, out)
    pub b: Option<Tensor>,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
        rng: &mut SeedStream,
    ) -> Result<Self> {
        let w = store.linear_init(&format!("{name}.w"), &[d_in, d_out], d_in, rng)?;
        let b = if bias {
            Some(store.zeros(&format!("{name}.b"), &[d_out])?)
        } else {
            None
        };
        Ok(Self { w, b })
    }

    /// Zero-initialized variant (used for output heads that must start
    /// uniform).
    pub fn new_zeros(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
    ) -> Result<Self> {
        let w = store.zeros(&format!("{name}.w"), &[d_in, d_out])?;
        let b = if bias {
            Some(store.zeros(&format!("{name}.b"), &[d_out])?)
        } else {
            None
        };
        Ok(Self { w, b })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.broadcast_matmul(&self.w)?;
        Ok(match &self.b {
            Some(b) => y.broadcast_add(b)?,
            None => y,
        })
    }
}

/// Layer normalization over the last dimension.
#[derive(Clone)]
pub struct LayerNorm {
    pub g: Tensor,
    pub b: Tensor,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            g: store.ones(&format!("{name}.g"), &[dim])?,
            b: store.zeros(&format!("{name}.b"), &[dim])?,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centered.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(normed
            .broadcast_mul(&self.g)?
            .broadcast_add(&self.b)?)
    }
}

/// Token embedding table: rows gathered by u32 index.
#[derive(Clone)]
pub struct Embedding {
    pub table: Tensor, // (vocab, dim)
}

impl Embedding {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        vocab: usize,
        dim: usize,
        rng: &mut SeedStream,
    ) -> Result<Self> {
        Ok(Self {
            table: store.normal(&format!("{name}.table"), &[vocab, dim], 0.02, rng)?,
        })
    }

    /// `ids` is any-rank u32 tensor; output appends the embedding dim.
    pub fn forward(&self, ids: &Tensor) -> Result<Tensor> {
        let shape = ids.dims().to_vec();
        let flat = ids.flatten_all()?;
        let rows = self.table.index_select(&flat, 0)?;
        let mut out_shape = shape;
        out_shape.push(self.table.dim(1)?);
        Ok(rows.reshape(out_shape)?)
    }
}

/// Two-layer feed-forward with GELU.
#[derive(Clone)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl Mlp {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_hidden: usize,
        d_out: usize,
        rng: &mut SeedStream,
    ) -> Result<Self> {
        Ok(Self {
            fc1: Linear::new(store, &format!("{name}.fc1"), d_in, d_hidden, true, rng)?,
            fc2: Linear::new(store, &format!("{name}.fc2"), d_hidden, d_out, true, rng)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.fc2.forward(&self.fc1.forward(x)?.gelu_erf()?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};

    #[test]
    fn linear_shapes() {
        let dev = Device::Cpu;
        let mut rng = SeedStream::new(0);
        let mut store = ParamStore::new(&dev, DType::F32);
        let lin = Linear::new(&mut store, "l", 4, 6, true, &mut rng).unwrap();
        let x2 = Tensor::zeros((3, 4), DType::F32, &dev).unwrap();
        assert_eq!(lin.forward(&x2).unwrap().dims(), &[3, 6]);
        let x3 = Tensor::zeros((2, 3, 4), DType::F32, &dev).unwrap();
        assert_eq!(lin.forward(&x3).unwrap().dims(), &[2, 3, 6]);
    }

    #[test]
    fn layer_norm_normalizes() {
        let dev = Device::Cpu;
        let mut store = ParamStore::new(&dev, DType::F64);
        let ln = LayerNorm::new(&mut store, "ln", 8).unwrap();
        let x = Tensor::from_vec(
            (0..8).map(|i| i as f64 * 3.0 + 1.0).collect::<Vec<_>>(),
            (1, 8),
            &dev,
        )
        .unwrap();
        let y = ln.forward(&x).unwrap().flatten_all().unwrap().to_vec1::<f64>().unwrap();
        let mean = y.iter().sum::<f64>() / 8.0;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 8.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn embedding_gathers_rows() {
        let dev = Device::Cpu;
        let mut rng = SeedStream::new(0);
        let mut store = ParamStore::new(&dev, DType::F32);
        let emb = Embedding::new(&mut store, "e", 5, 3, &mut rng).unwrap();
        let ids = Tensor::from_vec(vec![4u32, 0], (2,), &dev).unwrap();
        let out = emb.forward(&ids).unwrap();
        assert_eq!(out.dims(), &[2, 3]);
        let row4 = emb.table.get(4).unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(out.get(0).unwrap().to_vec1::<f32>().unwrap(), row4);
    }
}
