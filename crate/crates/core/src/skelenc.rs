//! Skeleton sequences as colour images.
//!
//! Coordinates are mapped affinely onto [0, 255] using the minimum and
//! maximum over every coordinate of the sequence (all joints, frames and
//! axes together), then laid out with one row per joint and one column per
//! frame, x/y/z going to the red/green/blue channels.

use crate::error::{Error, Result};
use crate::ingest::{Frame, SkeletonSequence};

/// Default number of image columns after temporal resampling.
pub const DEFAULT_TARGET_FRAMES: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedSkeleton {
    /// Frame-major, values in [0, 255].
    pub joints: Vec<[f64; 3]>,
    pub num_frames: usize,
    pub num_joints: usize,
    pub c_min: f64,
    pub c_max: f64,
}

impl NormalizedSkeleton {
    #[inline]
    pub fn joint(&self, frame: usize, joint: usize) -> [f64; 3] {
        self.joints[frame * self.num_joints + joint]
    }
}

/// K x T x 3 image: rows are joints, columns are frames.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkeletonImage {
    pub joints: usize,
    pub frames: usize,
    pub pixels: Vec<u8>,
}

impl SkeletonImage {
    #[inline]
    pub fn pixel(&self, joint: usize, frame: usize) -> [u8; 3] {
        let i = (joint * self.frames + frame) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// As an RGB frame (width = frames, height = joints), e.g. for PPM export.
    pub fn to_frame(&self) -> Frame {
        Frame::new(self.frames, self.joints, 3, self.pixels.clone()).expect("valid image dims")
    }

    /// Channel-major planes scaled to [0, 1]: `[c][joint][frame]`.
    pub fn to_channels(&self) -> Vec<f64> {
        let plane = self.joints * self.frames;
        let mut out = vec![0.0; 3 * plane];
        for (p, px) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * plane + p] = px[c] as f64 / 255.0;
            }
        }
        out
    }

    /// Inverse affine map back to world coordinates, `[frame][joint]` order.
    pub fn decode(&self, c_min: f64, c_max: f64) -> Vec<[f64; 3]> {
        let scale = (c_max - c_min) / 255.0;
        let mut out = Vec::with_capacity(self.joints * self.frames);
        for f in 0..self.frames {
            for k in 0..self.joints {
                let px = self.pixel(k, f);
                out.push(px.map(|v| c_min + v as f64 * scale));
            }
        }
        out
    }
}

pub fn normalize_skeleton(seq: &SkeletonSequence) -> Result<NormalizedSkeleton> {
    let (nf, nk) = (seq.num_frames(), seq.num_joints());
    let mut c_min = f64::INFINITY;
    let mut c_max = f64::NEG_INFINITY;
    for f in 0..nf {
        for k in 0..nk {
            for v in seq.joint(f, k) {
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite skeleton coordinate at frame {f}, joint {k}"
                    )));
                }
                c_min = c_min.min(v);
                c_max = c_max.max(v);
            }
        }
    }
    let range = c_max - c_min;
    let joints = seq
        .joints()
        .iter()
        .map(|j| {
            if range > 0.0 {
                j.map(|v| (255.0 * (v - c_min) / range).clamp(0.0, 255.0))
            } else {
                [0.0; 3]
            }
        })
        .collect();
    Ok(NormalizedSkeleton {
        joints,
        num_frames: nf,
        num_joints: nk,
        c_min,
        c_max,
    })
}

/// Source frame for output column `col` under nearest-neighbour resampling.
#[inline]
fn source_frame(col: usize, source: usize, target: usize) -> usize {
    (((2 * col + 1) * source) / (2 * target)).min(source - 1)
}

pub fn encode_skeleton_image(ns: &NormalizedSkeleton, target_frames: usize) -> Result<SkeletonImage> {
    if ns.num_frames == 0 || ns.num_joints == 0 {
        return Err(Error::Param("empty skeleton".into()));
    }
    if target_frames == 0 {
        return Err(Error::Param("target frame count must be positive".into()));
    }
    let mut pixels = Vec::with_capacity(ns.num_joints * target_frames * 3);
    for k in 0..ns.num_joints {
        for col in 0..target_frames {
            let f = source_frame(col, ns.num_frames, target_frames);
            for v in ns.joint(f, k) {
                pixels.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(SkeletonImage {
        joints: ns.num_joints,
        frames: target_frames,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(coords: Vec<[f64; 3]>, nf: usize, nk: usize) -> SkeletonSequence {
        SkeletonSequence::new(coords, nf, nk, (0..nf).collect()).unwrap()
    }

    #[test]
    fn endpoints_map_to_0_and_255() {
        let s = seq(vec![[0.0, 10.0, 255.0], [100.0, 0.0, 50.0]], 1, 2);
        let n = normalize_skeleton(&s).unwrap();
        assert_eq!((n.c_min, n.c_max), (0.0, 255.0));
        assert_eq!(n.joint(0, 0), [0.0, 10.0, 255.0]);
        assert_eq!(n.joint(0, 1)[1], 0.0);
    }

    #[test]
    fn degenerate_sequence_maps_to_zero() {
        let s = seq(vec![[3.5; 3]; 6], 3, 2);
        let n = normalize_skeleton(&s).unwrap();
        assert!(n.joints.iter().all(|j| *j == [0.0; 3]));
        let img = encode_skeleton_image(&n, 4).unwrap();
        assert!(img.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn non_finite_is_reported_with_location() {
        let mut c = vec![[0.0; 3]; 4];
        c[3][1] = f64::NAN;
        let err = normalize_skeleton(&seq(c, 2, 2)).unwrap_err();
        assert!(err.to_string().contains("frame 1, joint 1"));
    }

    #[test]
    fn image_layout_and_rounding() {
        let n = NormalizedSkeleton {
            joints: vec![
                [0.0, 127.5, 255.0],
                [1.4, 2.6, 3.5],
                [10.0, 20.0, 30.0],
                [4.0, 5.0, 6.0],
                [7.0, 8.0, 9.0],
                [11.0, 12.0, 13.0],
            ],
            num_frames: 2,
            num_joints: 3,
            c_min: 0.0,
            c_max: 1.0,
        };
        let img = encode_skeleton_image(&n, 2).unwrap();
        assert_eq!((img.joints, img.frames, img.pixels.len()), (3, 2, 18));
        assert_eq!(img.pixel(0, 0), [0, 128, 255]);
        assert_eq!(img.pixel(1, 0), [1, 3, 4]);
        assert_eq!(img.pixel(0, 1), [4, 5, 6]);
        assert_eq!(img.pixel(2, 1), [11, 12, 13]);
    }

    #[test]
    fn nearest_neighbour_upsampling_duplicates_columns() {
        let coords: Vec<[f64; 3]> = (0..4).map(|f| [f as f64 * 50.0; 3]).collect();
        let n = normalize_skeleton(&seq(coords, 4, 1)).unwrap();
        let img = encode_skeleton_image(&n, 8).unwrap();
        let cols: Vec<u8> = (0..8).map(|c| img.pixel(0, c)[0]).collect();
        assert_eq!(cols, vec![0, 0, 85, 85, 170, 170, 255, 255]);
        assert_eq!(source_frame(0, 3, 1), 1);
    }

    #[test]
    fn ppm_frame_dims() {
        let n = normalize_skeleton(&seq(vec![[1.0, 2.0, 3.0]; 10], 2, 5)).unwrap();
        let f = encode_skeleton_image(&n, 32).unwrap().to_frame();
        assert_eq!(f.dims(), (32, 5, 3));
    }

    fn arb_seq() -> impl Strategy<Value = SkeletonSequence> {
        (1usize..6, 1usize..6).prop_flat_map(|(nf, nk)| {
            proptest::collection::vec(
                proptest::array::uniform3(-1000.0f64..1000.0),
                nf * nk,
            )
            .prop_map(move |c| SkeletonSequence::new(c, nf, nk, (0..nf).collect()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn values_stay_in_range(s in arb_seq()) {
            let n = normalize_skeleton(&s).unwrap();
            prop_assert!(n.joints.iter().flatten().all(|v| (0.0..=255.0).contains(v)));
        }

        #[test]
        fn translation_and_scale_invariant(s in arb_seq(), shift in -500.0f64..500.0, scale in 0.01f64..100.0) {
            let moved: Vec<[f64; 3]> = s.joints().iter().map(|j| j.map(|v| v * scale + shift)).collect();
            let t = SkeletonSequence::new(moved, s.num_frames(), s.num_joints(), s.frame_indices.clone()).unwrap();
            let a = normalize_skeleton(&s).unwrap();
            let b = normalize_skeleton(&t).unwrap();
            for (x, y) in a.joints.iter().flatten().zip(b.joints.iter().flatten()) {
                prop_assert!((x - y).abs() <= 1.0);
            }
        }
    }
}
