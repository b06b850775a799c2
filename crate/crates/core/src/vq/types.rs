//! Domain types for the visual quantizer. Constructors validate the
//! invariants; the inner arrays are exposed read-only.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

/// An RGB image with values in [0, 1], stored (H, W, 3).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pixels: Array3<f32>,
}

impl Frame {
    pub fn new(pixels: Array3<f32>) -> Result<Self> {
        let (_, _, c) = pixels.dim();
        if c != 3 {
            return Err(Error::data(format!("frame must have 3 channels, got {c}")));
        }
        if pixels.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::data("frame values must be finite and in [0, 1]"));
        }
        Ok(Self { pixels })
    }

    /// Build from raw values, clamping into [0, 1]. Non-finite values are an
    /// error even here.
    pub fn from_raw_clamped(mut pixels: Array3<f32>) -> Result<Self> {
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("frame values must be finite"));
        }
        pixels.mapv_inplace(|v| v.clamp(0.0, 1.0));
        Self::new(pixels)
    }

    pub fn pixels(&self) -> &Array3<f32> {
        &self.pixels
    }

    pub fn height(&self) -> usize {
        self.pixels.dim().0
    }

    pub fn width(&self) -> usize {
        self.pixels.dim().1
    }
}

/// Grid of latent vectors, (h, w, d). Holds either pre-quantization encoder
/// outputs or post-quantization codebook entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    values: Array3<f32>,
}

impl LatentGrid {
    pub fn new(values: Array3<f32>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("latent grid must be finite"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array3<f32> {
        &self.values
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        let (h, w, _) = self.values.dim();
        (h, w)
    }

    pub fn code_dim(&self) -> usize {
        self.values.dim().2
    }
}

/// Grid of codebook indices, (h, w). Row-major flattening gives the index
/// sequence form used by the autoregressive model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenGrid {
    indices: Array2<u16>,
}

impl TokenGrid {
    pub fn new(indices: Array2<u16>) -> Self {
        Self { indices }
    }

    pub fn from_flat(flat: &[u16], h: usize, w: usize) -> Result<Self> {
        if flat.len() != h * w {
            return Err(Error::data(format!(
                "token grid: {} values cannot fill {h}x{w}",
                flat.len()
            )));
        }
        Ok(Self {
            indices: Array2::from_shape_vec((h, w), flat.to_vec())
                .map_err(|e| Error::data(e.to_string()))?,
        })
    }

    pub fn indices(&self) -> &Array2<u16> {
        &self.indices
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        self.indices.dim()
    }

    /// Row-major flattened sequence.
    pub fn flat(&self) -> Vec<u16> {
        self.indices.iter().copied().collect()
    }

    pub fn seq_len(&self) -> usize {
        let (h, w) = self.indices.dim();
        h * w
    }

    /// All indices strictly below `k`.
    pub fn check_vocab(&self, k: usize) -> Result<()> {
        if let Some(bad) = self.indices.iter().find(|i| **i as usize >= k) {
            return Err(Error::data(format!(
                "token index {bad} out of range for codebook of size {k}"
            )));
        }
        Ok(())
    }
}

/// Learnable discrete visual vocabulary: K entries of dimension d, (K, d).
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: Array2<f32>,
}

impl Codebook {
    pub fn new(entries: Array2<f32>) -> Result<Self> {
        let (k, _) = entries.dim();
        if k == 0 {
            return Err(Error::data("codebook must have at least one entry"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("codebook entries must be finite"));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &Array2<f32> {
        &self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.dim().0
    }

    pub fn code_dim(&self) -> usize {
        self.entries.dim().1
    }

    pub fn entry(&self, k: usize) -> &[f32] {
        self.entries.row(k).to_slice().expect("codebook rows are contiguous")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array2, Array3};

    #[test]
    fn frame_rejects_out_of_range() {
        let bad = Array3::from_elem((4, 4, 3), 1.5f32);
        assert!(Frame::new(bad).is_err());
        let nan = Array3::from_elem((4, 4, 3), f32::NAN);
        assert!(Frame::new(nan).is_err());
        let ok = Array3::from_elem((4, 4, 3), 0.5f32);
        assert!(Frame::new(ok).is_ok());
    }

    #[test]
    fn frame_clamps_raw() {
        let raw = Array3::from_elem((2, 2, 3), 2.0f32);
        let f = Frame::from_raw_clamped(raw).unwrap();
        assert!(f.pixels().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn token_grid_vocab_check() {
        let g = TokenGrid::from_flat(&[0, 1, 2, 3], 2, 2).unwrap();
        assert!(g.check_vocab(4).is_ok());
        assert!(g.check_vocab(3).is_err());
    }

    #[test]
    fn codebook_rejects_empty_and_nan() {
        assert!(Codebook::new(Array2::zeros((0, 4))).is_err());
        assert!(Codebook::new(Array2::from_elem((2, 2), f32::INFINITY)).is_err());
    }
}
