//! Small neural-network toolkit on top of candle: seeded initialization,
//! ordered parameter stores, a few layers, and the checkpoint container.

pub mod checkpoint;
pub mod layers;
pub mod params;
pub mod rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, ParamBlock};
pub use layers::{Embedding, LayerNorm, Linear, Mlp};
pub use params::ParamStore;
pub use rng::{derive_seed, SeedStream};
