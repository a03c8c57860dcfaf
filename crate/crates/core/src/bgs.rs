//! Sample-bank background subtraction.
//!
//! Every pixel keeps `samples` intensities drawn from its spatial
//! neighbourhood in the bootstrap frame. A pixel of a new frame is background
//! when at least `min_matches` of its samples lie within `match_radius` of it.
//! Background pixels occasionally refresh their own bank and a neighbour's
//! (conservative update); foreground pixels never touch the model.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::Frame;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BgsParams {
    /// Samples per pixel (`l`).
    pub samples: usize,
    pub neighborhood_radius: usize,
    /// Intensity distance `R` for a sample to count as a match.
    pub match_radius: u32,
    pub min_matches: usize,
    /// A background pixel updates with probability 1 / `update_subsampling`.
    pub update_subsampling: u32,
}

impl Default for BgsParams {
    fn default() -> Self {
        BgsParams {
            samples: 20,
            neighborhood_radius: 1,
            match_radius: 20,
            min_matches: 2,
            update_subsampling: 16,
        }
    }
}

impl BgsParams {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Param("background model needs at least one sample".into()));
        }
        if self.min_matches == 0 || self.min_matches > self.samples {
            return Err(Error::Param(format!(
                "min_matches {} must be in 1..={}",
                self.min_matches, self.samples
            )));
        }
        if self.update_subsampling == 0 {
            return Err(Error::Param("update_subsampling must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    params: BgsParams,
    /// `samples[(y * width + x) * l + j]`
    samples: Vec<u8>,
    rng: ChaCha8Rng,
}

/// Binary mask, `true` = foreground.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForegroundMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }
}

impl ForegroundMask {
    pub fn empty(width: usize, height: usize) -> Self {
        ForegroundMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} mask given {} bits",
                bits.len()
            )));
        }
        Ok(ForegroundMask {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Intersection over union; two empty masks score 1.
    pub fn iou(&self, other: &ForegroundMask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// 0 = background, 255 = foreground.
    pub fn to_frame(&self) -> Frame {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        Frame::gray(self.width, self.height, data).expect("mask dims are valid")
    }
}

fn require_gray(frame: &Frame) -> Result<()> {
    if frame.is_gray() {
        Ok(())
    } else {
        Err(Error::Param(
            "background model expects a grayscale frame; convert colour frames first".into(),
        ))
    }
}

pub fn init_background_model(frame: &Frame, params: BgsParams, seed: u64) -> Result<BackgroundModel> {
    require_gray(frame)?;
    params.validate()?;
    let (w, h) = (frame.width(), frame.height());
    let r = params.neighborhood_radius as isize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(w * h * params.samples);
    for y in 0..h {
        for x in 0..w {
            for _ in 0..params.samples {
                let dx = rng.gen_range(-r..=r);
                let dy = rng.gen_range(-r..=r);
                let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                samples.push(frame.luma(sx, sy));
            }
        }
    }
    Ok(BackgroundModel {
        width: w,
        height: h,
        params,
        samples,
        rng,
    })
}

impl BackgroundModel {
    pub fn params(&self) -> &BgsParams {
        &self.params
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// The sample bank of pixel (x, y).
    pub fn bank(&self, x: usize, y: usize) -> &[u8] {
        let l = self.params.samples;
        let p = y * self.width + x;
        &self.samples[p * l..(p + 1) * l]
    }

    pub fn set_match_radius(&mut self, radius: u32) {
        self.params.match_radius = radius;
    }

    fn check_dims(&self, frame: &Frame) -> Result<()> {
        require_gray(frame)?;
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::Dimension(format!(
                "frame is {}x{}, background model is {}x{}",
                frame.width(),
                frame.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }

    pub fn classify_foreground(&self, frame: &Frame) -> Result<ForegroundMask> {
        self.check_dims(frame)?;
        let l = self.params.samples;
        let radius = self.params.match_radius;
        let need = self.params.min_matches;
        let bits = frame
            .data()
            .iter()
            .zip(self.samples.chunks_exact(l))
            .map(|(&v, bank)| {
                let matches = bank
                    .iter()
                    .filter(|&&b| (v as i32 - b as i32).unsigned_abs() <= radius)
                    .count();
                matches < need
            })
            .collect();
        Ok(ForegroundMask {
            width: self.width,
            height: self.height,
            bits,
        })
    }

    /// Conservative, randomly subsampled update from background pixels only.
    pub fn update(&mut self, frame: &Frame, mask: &ForegroundMask) -> Result<()> {
        self.check_dims(frame)?;
        if mask.width != self.width || mask.height != self.height {
            return Err(Error::Dimension("mask does not match the model".into()));
        }
        let (w, h) = (self.width, self.height);
        let l = self.params.samples;
        let phi = self.params.update_subsampling;
        for y in 0..h {
            for x in 0..w {
                if mask.get(x, y) {
                    continue;
                }
                let v = frame.luma(x, y);
                if self.rng.gen_range(0..phi) == 0 {
                    let slot = self.rng.gen_range(0..l);
                    self.samples[(y * w + x) * l + slot] = v;
                }
                if self.rng.gen_range(0..phi) == 0 {
                    let (dx, dy) = NEIGHBOURS[self.rng.gen_range(0..NEIGHBOURS.len())];
                    let nx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let ny = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let slot = self.rng.gen_range(0..l);
                    self.samples[(ny * w + nx) * l + slot] = v;
                }
            }
        }
        Ok(())
    }
}

const NEIGHBOURS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

pub fn classify_foreground(model: &BackgroundModel, frame: &Frame) -> Result<ForegroundMask> {
    model.classify_foreground(frame)
}

pub fn update_background_model(
    model: &mut BackgroundModel,
    frame: &Frame,
    mask: &ForegroundMask,
) -> Result<()> {
    model.update(frame, mask)
}

pub fn erode(mask: &ForegroundMask) -> ForegroundMask {
    let (w, h) = (mask.width, mask.height);
    let mut out = ForegroundMask::empty(w, h);
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let all = (y - 1..=y + 1).all(|yy| (x - 1..=x + 1).all(|xx| mask.get(xx, yy)));
            out.set(x, y, all);
        }
    }
    out
}

pub fn dilate(mask: &ForegroundMask) -> ForegroundMask {
    let (w, h) = (mask.width, mask.height);
    let mut out = ForegroundMask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    out.set(xx, yy, true);
                }
            }
        }
    }
    out
}

/// 3x3 opening; pixels outside the mask count as background.
pub fn morph_open(mask: &ForegroundMask) -> ForegroundMask {
    dilate(&erode(mask))
}

struct Component {
    size: usize,
    min_x: usize,
    min_y: usize,
    max_x: usize,
    max_y: usize,
}

fn components(mask: &ForegroundMask) -> Vec<Component> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut c = Component {
            size: 0,
            min_x: usize::MAX,
            min_y: usize::MAX,
            max_x: 0,
            max_y: 0,
        };
        while let Some(p) = queue.pop_front() {
            let (x, y) = (p % w, p / w);
            c.size += 1;
            c.min_x = c.min_x.min(x);
            c.min_y = c.min_y.min(y);
            c.max_x = c.max_x.max(x);
            c.max_y = c.max_y.max(y);
            for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let q = yy * w + xx;
                    if mask.bits[q] && !seen[q] {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        out.push(c);
    }
    out
}

/// Square box around the largest 8-connected component, clipped to the
/// frame. Equal sizes resolve to the smallest bounding-box top-left (row,
/// then column). An empty mask yields the full frame.
pub fn extract_roi(mask: &ForegroundMask) -> BoundingBox {
    let (w, h) = (mask.width, mask.height);
    let best = components(mask).into_iter().min_by(|a, b| {
        b.size
            .cmp(&a.size)
            .then(a.min_y.cmp(&b.min_y))
            .then(a.min_x.cmp(&b.min_x))
    });
    let Some(c) = best else {
        return BoundingBox { x: 0, y: 0, w, h };
    };
    let bw = c.max_x - c.min_x + 1;
    let bh = c.max_y - c.min_y + 1;
    let side = bw.max(bh);
    let place = |start: usize, extent: usize, limit: usize| {
        let s = side.min(limit);
        let offset = (s - extent) / 2;
        let pos = start.saturating_sub(offset).min(limit - s);
        (pos, s)
    };
    let (x, sw) = place(c.min_x, bw, w);
    let (y, sh) = place(c.min_y, bh, h);
    BoundingBox { x, y, w: sw, h: sh }
}
