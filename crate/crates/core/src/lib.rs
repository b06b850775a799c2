//! Discrete emotion-controllable talking-face generation, desk scale.
//!
//! The pipeline has two training stages. Stage 1 learns the discrete
//! representations: a vector-quantized visual autoencoder that turns frames
//! into token grids, and an audio cross-reconstruction network that splits
//! per-frame cepstral features into independent emotion and content
//! components. Stage 2 fuses the audio emotion into the facial token
//! positions through a cross-attention emotion anchor and trains an
//! autoregressive transformer to predict token index sequences under that
//! hybrid condition. Generation samples new token grids per frame and decodes
//! them back to images.
//!
//! Everything runs on CPU and is bit-reproducible under a master seed.

pub mod anchor;
pub mod ar;
pub mod audio;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod synth;
pub mod vq;

pub use error::{Error, Result};
pub use vq::{Codebook, Frame, LatentGrid, TokenGrid};
