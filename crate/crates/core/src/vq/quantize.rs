//! Exact nearest-neighbor quantization between latent grids and token grids.
//!
//! Distances are plain f32 sums of squared differences, accumulated in index
//! order, and ties go to the lowest index. The training path reuses
//! `nearest_entry` so the trained model and this public op can never
//! disagree.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::vq::types::{Codebook, LatentGrid, TokenGrid};

/// Index of the codebook entry closest to `cell` in squared Euclidean
/// distance. Lowest index wins ties.
pub fn nearest_entry(cb: &Codebook, cell: &[f32]) -> usize {
    debug_assert_eq!(cell.len(), cb.code_dim());
    let mut best = 0usize;
    let mut best_dist = f32::INFINITY;
    for k in 0..cb.size() {
        let entry = cb.entry(k);
        let mut dist = 0.0f32;
        for (a, b) in cell.iter().zip(entry.iter()) {
            let diff = a - b;
            dist += diff * diff;
        }
        if dist < best_dist {
            best_dist = dist;
            best = k;
        }
    }
    best
}

/// Map every latent cell to its nearest codebook entry. Returns the index
/// grid and the entry grid.
pub fn quantize(latent: &LatentGrid, cb: &Codebook) -> Result<(TokenGrid, LatentGrid)> {
    if latent.code_dim() != cb.code_dim() {
        return Err(Error::data(format!(
            "latent dim {} does not match codebook dim {}",
            latent.code_dim(),
            cb.code_dim()
        )));
    }
    let (h, w) = latent.grid_dims();
    let d = cb.code_dim();
    let mut ids = Vec::with_capacity(h * w);
    let mut entries = Array3::<f32>::zeros((h, w, d));
    for i in 0..h {
        for j in 0..w {
            let cell: Vec<f32> = latent.values().slice(ndarray::s![i, j, ..]).to_vec();
            let k = nearest_entry(cb, &cell);
            ids.push(k as u16);
            entries
                .slice_mut(ndarray::s![i, j, ..])
                .assign(&ndarray::ArrayView1::from(cb.entry(k)));
        }
    }
    Ok((
        TokenGrid::from_flat(&ids, h, w)?,
        LatentGrid::new(entries)?,
    ))
}

/// Map indices back to their codebook entries.
pub fn lookup(tokens: &TokenGrid, cb: &Codebook) -> Result<LatentGrid> {
    tokens.check_vocab(cb.size())?;
    let (h, w) = tokens.grid_dims();
    let d = cb.code_dim();
    let mut entries = Array3::<f32>::zeros((h, w, d));
    for ((i, j), k) in tokens.indices().indexed_iter() {
        entries
            .slice_mut(ndarray::s![i, j, ..])
            .assign(&ndarray::ArrayView1::from(cb.entry(*k as usize)));
    }
    LatentGrid::new(entries)
}
