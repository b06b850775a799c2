//! Audio disentanglement: encoders that split per-frame cepstral features
//! into independent emotion and content components, the cross-reconstruction
//! decoder, the four-term training loss, and linear probes.

pub mod loss;
pub mod model;
pub mod probe;
pub mod train;
pub mod types;

pub use model::{AudioConfig, AudioNet};
pub use probe::{train_linear_probe, LinearProbe};
pub use types::{AudioFeatureClip, ContentComponent, EmotionComponent};
