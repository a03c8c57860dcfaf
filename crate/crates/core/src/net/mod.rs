//! CNN branches, fused per-step features, LSTM stack and Softmax head.

mod checkpoint;
mod config;
mod layers;
mod lstm;
mod network;
mod params;
mod tensor;

pub use checkpoint::{
    decode_tensors, encode_tensors, load_checkpoint, read_tensors, save_checkpoint, write_tensors, MAGIC,
    VERSION,
};
pub use config::{
    alexnet_branch, skeleton_branch, BranchSpec, Dims, FusionSpec, LayerSpec, LstmSpec, NetworkConfig, Shape,
    Shape3,
};
pub use lstm::{lstm_cell_step, lstm_gates, Gates, LstmCell, LstmState};
pub use network::{
    backward, cross_entropy, embed, forward, loss_and_gradient, softmax, ForwardTrace, SampleFeatures,
    StepFeatures,
};
pub use params::{param_specs, NetworkParams, ParamIndex, FORGET_BIAS, GATES};
pub use tensor::Tensor;
