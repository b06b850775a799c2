//! Procedural desk-scale corpus: parametric sprite faces with analytic
//! 68-point landmarks, paired synthetic audio features, and the full
//! content x emotion grid that makes exact cross-reconstruction targets
//! available.

pub mod audio;
pub mod corpus;
pub mod sprite;

pub use audio::synth_audio;
pub use corpus::{load_corpus, write_corpus, ClipRecord, Corpus, CorpusManifest, SynthConfig};
pub use sprite::{render_clip_visuals, render_controls, render_frame, RenderControls, SpriteParams};

/// Number of emotion categories in the corpus design.
pub const EMOTION_COUNT: usize = 8;
