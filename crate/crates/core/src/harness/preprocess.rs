use crate::bgs::{extract_roi, init_background_model, morph_open, BoundingBox, ForegroundMask};
use crate::error::{Error, Result};
use crate::hog::hog_descriptor;
use crate::ingest::{select_representatives, LabeledSample};
use crate::net::{SampleFeatures, StepFeatures};
use crate::par;
use crate::skelenc::{encode_skeleton_image, normalize_skeleton, SkeletonImage};

use super::config::TrainConfig;

/// Intermediate products of preprocessing one clip, for inspection.
#[derive(Clone, Debug)]
pub struct Preprocessed {
    pub sample_id: String,
    /// Original indices of the representative frames.
    pub frame_indices: Vec<usize>,
    /// Opened foreground masks.
    pub masks: Vec<ForegroundMask>,
    pub rois: Vec<BoundingBox>,
    pub skeleton_image: Option<SkeletonImage>,
    pub features: SampleFeatures,
}

/// Background-model seed for a clip: stable across runs and sample order.
fn sample_seed(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed
}

pub fn preprocess_detailed(sample: &LabeledSample, config: &TrainConfig) -> Result<Preprocessed> {
    let run = || -> Result<Preprocessed> {
        let reps = select_representatives(&sample.frames, config.jump)?;
        let first = sample.frames.frames[0].to_gray();
        let mut model = init_background_model(&first, config.bgs, sample_seed(config.seed, sample.id()))?;

        let mut masks = Vec::with_capacity(reps.len());
        let mut rois = Vec::with_capacity(reps.len());
        let mut steps = Vec::with_capacity(reps.len());
        for frame in &reps.frames {
            let gray = frame.to_gray();
            let raw = model.classify_foreground(&gray)?;
            model.update(&gray, &raw)?;
            let mask = morph_open(&raw);
            let roi = extract_roi(&mask);
            let crop = gray
                .to_plane()
                .crop(roi.x, roi.y, roi.w, roi.h)
                .resize_bilinear(config.roi_size, config.roi_size);
            let hog = if config.use_hog {
                hog_descriptor(&crop, &config.hog)?.values
            } else {
                Vec::new()
            };
            let roi_input = if config.use_cnn {
                crop.data.iter().map(|v| v / 255.0).collect()
            } else {
                Vec::new()
            };
            steps.push(StepFeatures { roi: roi_input, hog });
            masks.push(mask);
            rois.push(roi);
        }

        let skeleton_image = match (&sample.skeleton, config.use_skeleton) {
            (Some(skel), true) => {
                let aligned = skel.align_to(&reps.indices);
                Some(encode_skeleton_image(
                    &normalize_skeleton(&aligned)?,
                    config.skeleton_frames,
                )?)
            }
            _ => None,
        };
        Ok(Preprocessed {
            sample_id: sample.id().to_string(),
            frame_indices: reps.indices.clone(),
            masks,
            rois,
            features: SampleFeatures {
                steps,
                skeleton: skeleton_image.as_ref().map(SkeletonImage::to_channels),
            },
            skeleton_image,
        })
    };
    run().map_err(|e| e.in_sample(sample.id()))
}

/// Network input for one clip.
pub fn preprocess_sample(sample: &LabeledSample, config: &TrainConfig) -> Result<SampleFeatures> {
    preprocess_detailed(sample, config).map(|p| p.features)
}

/// Preprocesses clips in parallel; output order follows `samples`.
pub fn preprocess_all(samples: &[LabeledSample], config: &TrainConfig) -> Result<Vec<SampleFeatures>> {
    par::try_map(samples, |s| preprocess_sample(s, config))
}

/// Features of a whole split paired with labels.
pub fn preprocess_labeled(
    samples: &[LabeledSample],
    config: &TrainConfig,
) -> Result<Vec<(SampleFeatures, usize)>> {
    let feats = preprocess_all(samples, config)?;
    Ok(feats.into_iter().zip(samples.iter().map(|s| s.label)).collect())
}

pub(crate) fn require_nonempty<T>(items: &[T], what: &str) -> Result<()> {
    if items.is_empty() {
        Err(Error::Data(format!("{what} is empty")))
    } else {
        Ok(())
    }
}
