//! Run configuration, read from flat `key = value` files.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys and
//! unparsable values are configuration errors.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::bgs::BgsParams;
use crate::classify::KnnParams;
use crate::error::{Error, Result};
use crate::hog::HogParams;
use crate::ingest::{SplitRatios, SyntheticSpec};
use crate::net::NetworkConfig;
use crate::skelenc::DEFAULT_TARGET_FRAMES;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Keep one frame in every `jump`.
    pub jump: usize,
    pub hog: HogParams,
    pub knn: KnnParams,
    pub bgs: BgsParams,
    pub split: SplitRatios,
    /// Side of the square ROI crop fed to HOG and the frame CNN.
    pub roi_size: usize,
    pub skeleton_frames: usize,
    pub hidden_dim: usize,
    pub lstm_layers: usize,
    pub bidirectional: bool,
    pub use_cnn: bool,
    pub use_hog: bool,
    pub use_skeleton: bool,
    /// Worker threads for preprocessing and gradients; 0 = all cores.
    pub threads: usize,
    pub synth: SyntheticSpec,
    pub bench_jumps: Vec<usize>,
    /// Synthetic clip length for bench-jump when no dataset is given.
    pub bench_frames: usize,
    pub bench_samples_per_class: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 8,
            seed: 7,
            jump: 6,
            hog: HogParams::default(),
            knn: KnnParams::default(),
            bgs: BgsParams::default(),
            split: SplitRatios::default(),
            roi_size: 64,
            skeleton_frames: DEFAULT_TARGET_FRAMES,
            hidden_dim: 64,
            lstm_layers: 2,
            bidirectional: true,
            use_cnn: true,
            use_hog: true,
            use_skeleton: true,
            threads: 0,
            synth: SyntheticSpec::new(3, 30, 16, 64, 0.0, 7),
            bench_jumps: vec![4, 6, 8],
            bench_frames: 48,
            bench_samples_per_class: 10,
        }
    }
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("learning_rate", "SGD step size"),
    ("epochs", "training epochs"),
    ("batch_size", "samples per SGD step"),
    ("seed", "seed for splitting, initialization, shuffling and background models"),
    ("jump", "keep one frame in every `jump`"),
    ("k", "neighbours in the KNN fallback"),
    ("margin_tau", "minimum Softmax top-2 margin before deferring to KNN"),
    ("hog.cell_size", "HOG cell side in pixels"),
    ("hog.block_size", "HOG block side in cells"),
    ("hog.block_stride", "HOG block step in cells"),
    ("hog.bins", "orientation bins over [0, 180)"),
    ("hog.epsilon", "block normalization guard"),
    ("bgs.samples", "background samples per pixel"),
    ("bgs.neighborhood_radius", "radius of the sampling neighbourhood"),
    ("bgs.match_radius", "intensity distance for a matching sample"),
    ("bgs.min_matches", "matches needed to call a pixel background"),
    ("bgs.update_subsampling", "background pixels update with probability 1/n"),
    ("split.train", "training fraction"),
    ("split.val", "validation fraction"),
    ("split.test", "test fraction"),
    ("roi_size", "side of the resized ROI crop"),
    ("skeleton_frames", "columns of the skeleton image"),
    ("hidden_dim", "LSTM hidden width"),
    ("lstm_layers", "stacked LSTM layers"),
    ("bidirectional", "add a reverse-time LSTM pass (true/false)"),
    ("use_cnn", "include the frame CNN embedding"),
    ("use_hog", "include the HOG descriptor"),
    ("use_skeleton", "include the skeleton image embedding when joints exist"),
    ("threads", "worker threads, 0 for all cores"),
    ("synth.classes", "synthetic classes"),
    ("synth.samples_per_class", "synthetic clips per class"),
    ("synth.frames", "frames per synthetic clip"),
    ("synth.size", "synthetic frame side"),
    ("synth.noise", "synthetic pixel noise standard deviation"),
    ("synth.frame_rate", "nominal synthetic frame rate"),
    ("bench.jumps", "comma-separated jumps for bench-jump"),
    ("bench.frames", "synthetic clip length for bench-jump"),
    ("bench.samples_per_class", "synthetic clips per class for bench-jump"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

impl TrainConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "jump" => self.jump = parse(key, v)?,
            "k" => self.knn.k = parse(key, v)?,
            "margin_tau" => self.knn.margin_tau = parse(key, v)?,
            "hog.cell_size" => self.hog.cell_size = parse(key, v)?,
            "hog.block_size" => self.hog.block_size = parse(key, v)?,
            "hog.block_stride" => self.hog.block_stride = parse(key, v)?,
            "hog.bins" => self.hog.bins = parse(key, v)?,
            "hog.epsilon" => self.hog.epsilon = parse(key, v)?,
            "bgs.samples" => self.bgs.samples = parse(key, v)?,
            "bgs.neighborhood_radius" => self.bgs.neighborhood_radius = parse(key, v)?,
            "bgs.match_radius" => self.bgs.match_radius = parse(key, v)?,
            "bgs.min_matches" => self.bgs.min_matches = parse(key, v)?,
            "bgs.update_subsampling" => self.bgs.update_subsampling = parse(key, v)?,
            "split.train" => self.split.train = parse(key, v)?,
            "split.val" => self.split.val = parse(key, v)?,
            "split.test" => self.split.test = parse(key, v)?,
            "roi_size" => self.roi_size = parse(key, v)?,
            "skeleton_frames" => self.skeleton_frames = parse(key, v)?,
            "hidden_dim" => self.hidden_dim = parse(key, v)?,
            "lstm_layers" => self.lstm_layers = parse(key, v)?,
            "bidirectional" => self.bidirectional = parse_bool(key, v)?,
            "use_cnn" => self.use_cnn = parse_bool(key, v)?,
            "use_hog" => self.use_hog = parse_bool(key, v)?,
            "use_skeleton" => self.use_skeleton = parse_bool(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "synth.classes" => self.synth.classes = parse(key, v)?,
            "synth.samples_per_class" => self.synth.samples_per_class = parse(key, v)?,
            "synth.frames" => self.synth.frames = parse(key, v)?,
            "synth.size" => self.synth.size = parse(key, v)?,
            "synth.noise" => self.synth.noise = parse(key, v)?,
            "synth.frame_rate" => self.synth.frame_rate = parse(key, v)?,
            "bench.jumps" => {
                self.bench_jumps = v
                    .split(',')
                    .map(|j| parse(key, j.trim()))
                    .collect::<Result<_>>()?
            }
            "bench.frames" => self.bench_frames = parse(key, v)?,
            "bench.samples_per_class" => self.bench_samples_per_class = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip(e))))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = TrainConfig::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.jump == 0 {
            return bad("epochs, batch_size and jump must be at least 1".into());
        }
        if self.roi_size == 0 || self.skeleton_frames == 0 || self.hidden_dim == 0 || self.lstm_layers == 0 {
            return bad("roi_size, skeleton_frames, hidden_dim and lstm_layers must be positive".into());
        }
        if !(self.use_cnn || self.use_hog || self.use_skeleton) {
            return bad("at least one of use_cnn, use_hog, use_skeleton must be true".into());
        }
        if self.bench_jumps.is_empty() || self.bench_jumps.contains(&0) {
            return bad("bench.jumps must list positive jumps".into());
        }
        if self.bench_frames == 0 || self.bench_samples_per_class == 0 {
            return bad("bench.frames and bench.samples_per_class must be positive".into());
        }
        let wrap = |r: Result<()>| r.map_err(|e| Error::Config(strip(e)));
        wrap(self.knn.validate())?;
        wrap(self.bgs.validate())?;
        wrap(self.split.validate())?;
        wrap(self.hog.validate())?;
        if self.use_hog {
            wrap(self.hog.descriptor_len(self.roi_size, self.roi_size).map(|_| ()))?;
        }
        Ok(())
    }

    /// `key = value` text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let jumps: Vec<String> = self.bench_jumps.iter().map(|j| j.to_string()).collect();
        let pairs: Vec<(&str, String)> = vec![
            ("learning_rate", self.learning_rate.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("seed", self.seed.to_string()),
            ("jump", self.jump.to_string()),
            ("k", self.knn.k.to_string()),
            ("margin_tau", self.knn.margin_tau.to_string()),
            ("hog.cell_size", self.hog.cell_size.to_string()),
            ("hog.block_size", self.hog.block_size.to_string()),
            ("hog.block_stride", self.hog.block_stride.to_string()),
            ("hog.bins", self.hog.bins.to_string()),
            ("hog.epsilon", self.hog.epsilon.to_string()),
            ("bgs.samples", self.bgs.samples.to_string()),
            ("bgs.neighborhood_radius", self.bgs.neighborhood_radius.to_string()),
            ("bgs.match_radius", self.bgs.match_radius.to_string()),
            ("bgs.min_matches", self.bgs.min_matches.to_string()),
            ("bgs.update_subsampling", self.bgs.update_subsampling.to_string()),
            ("split.train", self.split.train.to_string()),
            ("split.val", self.split.val.to_string()),
            ("split.test", self.split.test.to_string()),
            ("roi_size", self.roi_size.to_string()),
            ("skeleton_frames", self.skeleton_frames.to_string()),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("lstm_layers", self.lstm_layers.to_string()),
            ("bidirectional", self.bidirectional.to_string()),
            ("use_cnn", self.use_cnn.to_string()),
            ("use_hog", self.use_hog.to_string()),
            ("use_skeleton", self.use_skeleton.to_string()),
            ("threads", self.threads.to_string()),
            ("synth.classes", self.synth.classes.to_string()),
            ("synth.samples_per_class", self.synth.samples_per_class.to_string()),
            ("synth.frames", self.synth.frames.to_string()),
            ("synth.size", self.synth.size.to_string()),
            ("synth.noise", self.synth.noise.to_string()),
            ("synth.frame_rate", self.synth.frame_rate.to_string()),
            ("bench.jumps", jumps.join(",")),
            ("bench.frames", self.bench_frames.to_string()),
            ("bench.samples_per_class", self.bench_samples_per_class.to_string()),
        ];
        for ((key, doc), (k2, v)) in KEYS.iter().zip(&pairs) {
            debug_assert_eq!(key, k2);
            let _ = writeln!(s, "# {doc}\n{key} = {v}");
        }
        s
    }

    /// The synthetic dataset bench-jump generates: `synth` with longer clips.
    pub fn bench_spec(&self) -> SyntheticSpec {
        let mut spec = self.synth.clone();
        spec.frames = self.bench_frames;
        spec.samples_per_class = self.bench_samples_per_class;
        spec
    }

    /// Network for `num_classes` classes; `skeleton_joints` is `None` when
    /// the data has no joints (the skeleton block is then left out).
    pub fn network(&self, num_classes: usize, skeleton_joints: Option<usize>) -> Result<NetworkConfig> {
        let hog_dim = if self.use_hog {
            Some(self.hog.descriptor_len(self.roi_size, self.roi_size)?)
        } else {
            None
        };
        let skeleton = skeleton_joints
            .filter(|_| self.use_skeleton)
            .map(|j| (j, self.skeleton_frames));
        let mut net = NetworkConfig::desk(num_classes, self.roi_size, hog_dim, skeleton);
        net.fusion.cnn_embedding = self.use_cnn;
        net.lstm.hidden_dim = self.hidden_dim;
        net.lstm.num_layers = self.lstm_layers;
        net.lstm.bidirectional = self.bidirectional;
        net.validate()?;
        Ok(net)
    }
}

/// The message of an error without its category prefix.
fn strip(e: Error) -> String {
    match e {
        Error::Config(m) | Error::Param(m) | Error::Dimension(m) => m,
        other => other.to_string(),
    }
}
