//! Human action recognition from short clips.
//!
//! The pipeline keeps one frame in every `J`, separates the moving subject
//! from a sample-bank background model, describes the region of interest with
//! oriented-gradient histograms and a CNN embedding, encodes skeleton joint
//! tracks as a colour image, and feeds the per-frame fused features through a
//! bidirectional LSTM stack with a Softmax head. Ambiguous Softmax outputs
//! fall back to a weighted k-nearest-neighbour vote over training embeddings.
//!
//! Module map:
//!
//! * [`ingest`] frame/skeleton loading, synthetic data, frame selection, splits
//! * [`bgs`] background model, foreground masks, opening, ROI
//! * [`hog`] gradients and block-normalized orientation histograms
//! * [`skelenc`] skeleton normalization and image encoding
//! * [`net`] CNN + LSTM network, backpropagation, checkpoints
//! * [`classify`] Softmax margin routing and weighted KNN
//! * [`harness`] preprocessing, SGD training, evaluation, jump benchmark

pub mod bgs;
pub mod classify;
pub mod error;
pub mod harness;
pub mod hog;
pub mod ingest;
pub mod net;
pub mod par;
pub mod skelenc;

pub use error::{Error, Result};
