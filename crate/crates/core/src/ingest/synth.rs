//! Synthetic moving-sprite clips with exact ground truth.
//!
//! Every class is a distinct motion pattern of a bright square over a smooth
//! textured static background. Frame 0 of every clip is an empty plate of the
//! scene (the sprite is not rendered there) so that a sample-bank background
//! model bootstrapped from the first frame has no ghost to dissolve. Joint
//! tracks follow the sprite's centre and corners on every frame, frame 0
//! included.
//! The sprite is drawn at several positions over a short shutter interval,
//! so a moving square leaves a streak along its direction of travel.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{Dataset, LabeledSample};
use super::frame::{Frame, FrameSequence};
use super::skeleton::SkeletonSequence;
use crate::bgs::ForegroundMask;
use crate::error::{Error, Result};

pub const SPRITE_INTENSITY: u8 = 220;
pub const JOINTS: usize = 5;
const DEPTH: f64 = 40.0;
/// Shutter time in frame intervals; the sprite is drawn at every sub-step
/// position within it, leaving a streak along the motion.
const EXPOSURE: f64 = 2.0;
const EXPOSURE_STEPS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub samples_per_class: usize,
    pub frames: usize,
    /// Width and height of every (square) frame.
    pub size: usize,
    /// Standard deviation of additive pixel noise, in intensity units.
    pub noise: f64,
    pub seed: u64,
    pub frame_rate: f64,
}

impl SyntheticSpec {
    pub fn new(
        classes: usize,
        samples_per_class: usize,
        frames: usize,
        size: usize,
        noise: f64,
        seed: u64,
    ) -> Self {
        SyntheticSpec {
            classes,
            samples_per_class,
            frames,
            size,
            noise,
            seed,
            frame_rate: 16.0,
        }
    }
}

pub struct SyntheticDataset {
    pub dataset: Dataset,
    /// `masks[sample][frame]`: exact sprite support.
    pub masks: Vec<Vec<ForegroundMask>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Motion {
    Horizontal,
    Vertical,
    Circular,
    Diagonal,
    AntiDiagonal,
    Zigzag,
    Orbit { turns: u32 },
}

impl Motion {
    pub fn for_class(class: usize) -> Motion {
        match class {
            0 => Motion::Horizontal,
            1 => Motion::Vertical,
            2 => Motion::Circular,
            3 => Motion::Diagonal,
            4 => Motion::AntiDiagonal,
            5 => Motion::Zigzag,
            n => Motion::Orbit {
                turns: (n - 4) as u32,
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            Motion::Horizontal => "horizontal".into(),
            Motion::Vertical => "vertical".into(),
            Motion::Circular => "circular".into(),
            Motion::Diagonal => "diagonal".into(),
            Motion::AntiDiagonal => "antidiagonal".into(),
            Motion::Zigzag => "zigzag".into(),
            Motion::Orbit { turns } => format!("orbit{turns}"),
        }
    }
}

/// Sprite top-left position as a function of clip progress in [0, 1].
struct Path {
    motion: Motion,
    start: (f64, f64),
    end: (f64, f64),
    centre: (f64, f64),
    radius: f64,
    phase: f64,
    direction: f64,
    amplitude: f64,
}

impl Path {
    fn sample(motion: Motion, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Path {
        let span = hi - lo;
        let sweep = |rng: &mut ChaCha8Rng| {
            let travel = span * rng.gen_range(0.55..0.85);
            let a = lo + rng.gen_range(0.0..=(span - travel));
            if rng.gen_bool(0.5) {
                (a, a + travel)
            } else {
                (a + travel, a)
            }
        };
        let fixed = |rng: &mut ChaCha8Rng| rng.gen_range(lo..=hi);
        let mid = (lo + hi) / 2.0;
        let mut path = Path {
            motion,
            start: (mid, mid),
            end: (mid, mid),
            centre: (mid, mid),
            radius: 0.0,
            phase: 0.0,
            direction: 1.0,
            amplitude: 0.0,
        };
        match motion {
            Motion::Horizontal => {
                let (a, b) = sweep(rng);
                let y = fixed(rng);
                path.start = (a, y);
                path.end = (b, y);
            }
            Motion::Vertical => {
                let (a, b) = sweep(rng);
                let x = fixed(rng);
                path.start = (x, a);
                path.end = (x, b);
            }
            Motion::Diagonal | Motion::AntiDiagonal => {
                let (ax, bx) = sweep(rng);
                let (mut ay, mut by) = sweep(rng);
                let same = (bx - ax).signum() == (by - ay).signum();
                if same != (motion == Motion::Diagonal) {
                    std::mem::swap(&mut ay, &mut by);
                }
                path.start = (ax, ay);
                path.end = (bx, by);
            }
            Motion::Zigzag => {
                let (a, b) = sweep(rng);
                path.amplitude = span * rng.gen_range(0.15..0.25);
                let y = rng.gen_range(lo + path.amplitude..=hi - path.amplitude);
                path.start = (a, y);
                path.end = (b, y);
            }
            Motion::Circular | Motion::Orbit { .. } => {
                path.radius = span / 2.0 * rng.gen_range(0.5..0.8);
                let slack = span / 2.0 - path.radius;
                path.centre = (
                    mid + rng.gen_range(-slack..=slack),
                    mid + rng.gen_range(-slack..=slack),
                );
                path.phase = rng.gen_range(0.0..2.0 * PI);
                path.direction = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            }
        }
        path
    }

    fn at(&self, t: f64) -> (f64, f64) {
        let lerp = |a: f64, b: f64| a + (b - a) * t;
        match self.motion {
            Motion::Horizontal | Motion::Vertical | Motion::Diagonal | Motion::AntiDiagonal => {
                (lerp(self.start.0, self.end.0), lerp(self.start.1, self.end.1))
            }
            Motion::Zigzag => (
                lerp(self.start.0, self.end.0),
                self.start.1 + self.amplitude * (3.0 * PI * t).sin(),
            ),
            Motion::Circular | Motion::Orbit { .. } => {
                let sweep = match self.motion {
                    Motion::Orbit { turns } => 2.0 * PI * turns as f64,
                    _ => 1.5 * PI,
                };
                let a = self.phase + self.direction * sweep * t;
                (
                    self.centre.0 + self.radius * a.cos(),
                    self.centre.1 + self.radius * a.sin(),
                )
            }
        }
    }
}

fn background(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    let lx = rng.gen_range(24.0..40.0);
    let ly = rng.gen_range(24.0..40.0);
    let px = rng.gen_range(0.0..2.0 * PI);
    let py = rng.gen_range(0.0..2.0 * PI);
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            out.push(
                80.0 + 30.0 * (2.0 * PI * x as f64 / lx + px).sin()
                    + 20.0 * (2.0 * PI * y as f64 / ly + py).cos(),
            );
        }
    }
    out
}

pub fn generate_synthetic_dataset(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    if spec.classes == 0 || spec.samples_per_class == 0 || spec.frames == 0 {
        return Err(Error::Param(
            "classes, samples per class and frames must all be at least 1".into(),
        ));
    }
    if spec.size < 16 {
        return Err(Error::Param(format!(
            "frame size {} is too small (minimum 16)",
            spec.size
        )));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::Param(format!("noise {} must be >= 0", spec.noise)));
    }
    let size = spec.size;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pixel_noise = Normal::new(0.0, spec.noise.max(f64::MIN_POSITIVE)).unwrap();
    let joint_noise = Normal::new(0.0, (spec.noise / 10.0).max(f64::MIN_POSITIVE)).unwrap();

    let class_names: Vec<String> = (0..spec.classes)
        .map(|c| Motion::for_class(c).name())
        .collect();
    let mut samples = Vec::new();
    let mut masks = Vec::new();

    for (label, class_name) in class_names.iter().enumerate() {
        let motion = Motion::for_class(label);
        for index in 0..spec.samples_per_class {
            let side = ((size as f64 * rng.gen_range(0.16..0.22)).round() as usize).max(3);
            let lo = 1.0;
            let hi = (size - side - 1) as f64;
            let path = Path::sample(motion, &mut rng, lo, hi);
            let plate = background(&mut rng, size);

            let mut frames = Vec::with_capacity(spec.frames);
            let mut sample_masks = Vec::with_capacity(spec.frames);
            let mut joints = Vec::with_capacity(spec.frames * JOINTS);
            for t in 0..spec.frames {
                let progress = if spec.frames > 1 {
                    t as f64 / (spec.frames - 1) as f64
                } else {
                    0.0
                };
                let place = |p: f64| {
                    let (fx, fy) = path.at(p);
                    (
                        fx.round().clamp(0.0, (size - side) as f64) as usize,
                        fy.round().clamp(0.0, (size - side) as f64) as usize,
                    )
                };
                let (left, top) = place(progress);
                let visible = t > 0;

                let mut mask = ForegroundMask::empty(size, size);
                let mut pixels = plate.clone();
                if visible {
                    let step = EXPOSURE / (spec.frames - 1) as f64 / EXPOSURE_STEPS as f64;
                    for k in 0..=EXPOSURE_STEPS {
                        let (sx, sy) = place((progress - k as f64 * step).max(0.0));
                        for y in sy..sy + side {
                            for x in sx..sx + side {
                                pixels[y * size + x] = SPRITE_INTENSITY as f64;
                                mask.set(x, y, true);
                            }
                        }
                    }
                }
                let data = pixels
                    .iter()
                    .map(|&v| {
                        let v = if spec.noise > 0.0 {
                            v + pixel_noise.sample(&mut rng)
                        } else {
                            v
                        };
                        v.round().clamp(0.0, 255.0) as u8
                    })
                    .collect();
                frames.push(Frame::gray(size, size, data)?);
                sample_masks.push(mask);

                let (l, tp, s) = (left as f64, top as f64, side as f64);
                let centre = [l + s / 2.0, tp + s / 2.0, DEPTH];
                let corners = [
                    [l, tp, DEPTH],
                    [l + s, tp, DEPTH],
                    [l, tp + s, DEPTH],
                    [l + s, tp + s, DEPTH],
                ];
                for mut j in std::iter::once(centre).chain(corners) {
                    if spec.noise > 0.0 {
                        for v in j.iter_mut() {
                            *v += joint_noise.sample(&mut rng);
                        }
                    }
                    joints.push(j);
                }
            }
            let id = format!("{class_name}/{class_name}_{index:03}");
            let seq = FrameSequence::new(frames, id, spec.frame_rate)?;
            let skeleton = SkeletonSequence::new(
                joints,
                spec.frames,
                JOINTS,
                (0..spec.frames).collect(),
            )?;
            samples.push(LabeledSample {
                frames: seq,
                skeleton: Some(skeleton),
                label,
            });
            masks.push(sample_masks);
        }
    }
    Ok(SyntheticDataset {
        dataset: Dataset::new(samples, class_names)?,
        masks,
    })
}
