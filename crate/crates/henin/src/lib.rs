//! Explainable cyberbullying session detection.
//!
//! A media session (one post plus its time-ordered comment thread) is
//! classified as bullying or not, and the comments that drove the verdict
//! are returned as a ranked list. The model combines a hierarchical
//! self-attention comment encoder, a post-comment co-attention mechanism,
//! and two graph convolutional interaction extractors (session-session and
//! post-post), fused through a single sigmoid head.

pub mod attention;
pub mod coattention;
pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod graph;
pub mod gru;
pub mod model;
pub mod tensor;

pub use error::HeninError;

pub type Result<T> = std::result::Result<T, HeninError>;
