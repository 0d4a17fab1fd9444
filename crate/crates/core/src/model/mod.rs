//! Transformer encoder with reference, target-class, text and masked-token heads.

pub mod checkpoint;
pub mod config;
pub mod network;
pub mod ops;
pub mod params;

pub use checkpoint::Checkpoint;
pub use config::ModelConfig;
pub use network::{
    backward, backward_batch, forward, forward_batch_with_cache, forward_with_cache, select_target, spatial_matrix, ForwardCache,
    HeadGrads, Input, Mode, ModelOutput,
};
pub use params::{init_model, Float, LayerParams, ModelParams};
