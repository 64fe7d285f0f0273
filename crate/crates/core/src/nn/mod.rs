//! Small fixed-architecture function approximator with reverse-mode
//! gradients and an Adam optimizer.
//!
//! The architecture: per-vehicle inputs pass through two 1-D convolutional
//! layers (kernel and stride equal to the per-vehicle width, then 1x1) and a
//! max-pool over vehicles; the ego inputs pass through one dense layer; both
//! join at a concatenation layer. With a quantile head, a cosine embedding of
//! the sample quantile is passed through a dense layer and merged with the
//! concatenation output as a Hadamard product. Two dense layers and a dueling
//! value/advantage head produce one output per action (per quantile sample).

mod adam;
mod network;
mod spec;
mod weights;

pub use adam::AdamState;
pub use network::{quantile_embedding, Network, QuantileBatch, Trace};
pub use spec::{Layout, NetworkSpec};
pub use weights::{Gradients, WeightSet};
