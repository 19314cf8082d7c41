//! Three-dimensional graph convolution over scalar and vector atom features.

mod checkpoint;
mod config;
mod forward;
mod layers;
mod params;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
};
pub use config::{Aggregation, ModelConfig, VectorActivation};
pub use forward::{
    aggregate, backward, backward_into, fc_head, forward, predict, Aggregated, ForwardCache, Prediction, Provenance,
};
pub use layers::{conv_update, interconvert, NodeState, PairwiseIntermediates};
pub use params::{init_params, parameter_shapes, Gradients, ModelParams};
