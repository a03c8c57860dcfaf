//! Loading clips and skeletons, synthetic data, frame selection and splits.

mod dataset;
mod frame;
pub mod pnm;
mod skeleton;
mod split;
mod synth;

pub use dataset::{
    frame_file_name, load_dataset, load_frame_sequence, load_sample, save_dataset,
    select_representatives, Dataset, LabeledSample, DEFAULT_FRAME_RATE, SKELETON_FILE,
};
pub use frame::{Frame, FrameSequence, Plane};
pub use skeleton::SkeletonSequence;
pub use split::{split_dataset, SplitRatios};
pub use synth::{generate_synthetic_dataset, Motion, SyntheticDataset, SyntheticSpec, JOINTS, SPRITE_INTENSITY};
