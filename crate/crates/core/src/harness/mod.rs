//! Preprocessing, training, evaluation and the frame-jump benchmark.

mod bench;
mod config;
mod eval;
mod model;
mod preprocess;
mod train;

pub use bench::{bench_csv, benchmark_jump, time_clips, BenchmarkRow, ClipTiming, PUBLISHED_REFERENCE};
pub use config::{TrainConfig, KEYS};
pub use eval::{evaluate, ConfusionMatrix, Metrics};
pub use model::Model;
pub use preprocess::{preprocess_all, preprocess_detailed, preprocess_labeled, preprocess_sample, Preprocessed};
pub use train::{history_csv, score, train, train_dataset, EpochRecord, Trained};
