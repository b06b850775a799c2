//! Vector-quantized visual autoencoder: domain types, exact nearest-neighbor
//! quantization, the encoder/decoder networks, the VQ-GAN losses, and the
//! stage-1 visual trainer.

pub mod loss;
pub mod model;
pub mod quantize;
pub mod train;
pub mod types;
pub mod wire;

pub use model::{VqConfig, VqModel};
pub use quantize::{lookup, nearest_entry, quantize};
pub use types::{Codebook, Frame, LatentGrid, TokenGrid};
pub use wire::{read_token_grid, write_token_grid};
