//! Emotion anchor: facial-region estimation from landmark centers, the
//! condition embedders, the cross-attention fusion of audio emotion into
//! facial token embeddings, and hybrid condition assembly.

pub mod condition;
pub mod ea;
pub mod embed;
pub mod region;

pub use condition::build_condition;
pub use ea::EmotionAnchorNet;
pub use embed::ConditionEmbedder;
pub use region::{facial_region, read_landmarks, write_landmarks, FacialRegion, RegionCell};
