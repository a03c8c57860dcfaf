//! Histogram of oriented gradients.
//!
//! Derivatives use the `[+1, 0, -1]` kernel as a cross-correlation:
//! `IX(x, y) = I(x-1, y) - I(x+1, y)`, `IY(x, y) = I(x, y-1) - I(x, y+1)`,
//! edge pixels replicated. Orientation is `atan2(IX, IY)` folded into
//! [0, 180) degrees. Votes are magnitude weighted and split linearly between
//! the two nearest bin centres (wrapping at 180). Each block of cells is L2
//! normalized as `v / sqrt(|v|^2 + eps^2)`.

use crate::error::{Error, Result};
use crate::ingest::Plane;

#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub ix: Vec<f64>,
    pub iy: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HogParams {
    /// Cell side in pixels.
    pub cell_size: usize,
    /// Block side in cells.
    pub block_size: usize,
    /// Block step in cells.
    pub block_stride: usize,
    pub bins: usize,
    pub epsilon: f64,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            cell_size: 8,
            block_size: 2,
            block_stride: 1,
            bins: 9,
            epsilon: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HogLayout {
    pub cells_x: usize,
    pub cells_y: usize,
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub block_cells: usize,
    pub bins: usize,
}

impl HogLayout {
    pub fn len(&self) -> usize {
        self.blocks_x * self.blocks_y * self.block_cells * self.bins
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HogDescriptor {
    pub values: Vec<f64>,
    pub layout: HogLayout,
}

impl HogParams {
    pub fn validate(&self) -> Result<()> {
        if self.cell_size == 0 || self.block_size == 0 || self.block_stride == 0 {
            return Err(Error::Param(
                "cell size, block size and block stride must be positive".into(),
            ));
        }
        if self.bins < 2 {
            return Err(Error::Param(format!("need at least 2 bins, got {}", self.bins)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Param("epsilon must be non-negative".into()));
        }
        Ok(())
    }

    /// Descriptor layout for a `width` x `height` image.
    pub fn layout(&self, width: usize, height: usize) -> Result<HogLayout> {
        self.validate()?;
        if width % self.cell_size != 0 || height % self.cell_size != 0 {
            return Err(Error::Dimension(format!(
                "{width}x{height} is not divisible into {}-pixel cells",
                self.cell_size
            )));
        }
        let cells_x = width / self.cell_size;
        let cells_y = height / self.cell_size;
        if cells_x < self.block_size || cells_y < self.block_size {
            return Err(Error::Dimension(format!(
                "{cells_x}x{cells_y} cells cannot hold a {0}x{0} block",
                self.block_size
            )));
        }
        Ok(HogLayout {
            cells_x,
            cells_y,
            blocks_x: (cells_x - self.block_size) / self.block_stride + 1,
            blocks_y: (cells_y - self.block_size) / self.block_stride + 1,
            block_cells: self.block_size * self.block_size,
            bins: self.bins,
        })
    }

    pub fn descriptor_len(&self, width: usize, height: usize) -> Result<usize> {
        Ok(self.layout(width, height)?.len())
    }
}

pub fn gradients(image: &Plane) -> Result<GradientField> {
    let (w, h) = (image.width, image.height);
    if w < 3 || h < 3 {
        return Err(Error::Dimension(format!(
            "gradient needs at least 3x3 pixels, got {w}x{h}"
        )));
    }
    let mut ix = Vec::with_capacity(w * h);
    let mut iy = Vec::with_capacity(w * h);
    for y in 0..h {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for x in 0..w {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            ix.push(image.get(left, y) - image.get(right, y));
            iy.push(image.get(x, up) - image.get(x, down));
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        ix,
        iy,
    })
}

/// Unsigned orientation in degrees, [0, 180); zero vectors map to 0.
#[inline]
pub fn orientation(ix: f64, iy: f64) -> f64 {
    if ix == 0.0 && iy == 0.0 {
        return 0.0;
    }
    let deg = ix.atan2(iy).to_degrees().rem_euclid(180.0);
    if deg >= 180.0 {
        0.0
    } else {
        deg
    }
}

/// Per-pixel magnitude and unsigned orientation (degrees).
pub fn magnitude_angle(g: &GradientField) -> (Vec<f64>, Vec<f64>) {
    g.ix
        .iter()
        .zip(&g.iy)
        .map(|(&ix, &iy)| {
            let m = (ix * ix + iy * iy).sqrt();
            (m, if m == 0.0 { 0.0 } else { orientation(ix, iy) })
        })
        .unzip()
}

/// Raw (unnormalized) per-cell histograms, `hist[(cy * cells_x + cx) * bins + b]`.
pub fn cell_histograms(image: &Plane, params: &HogParams) -> Result<(Vec<f64>, HogLayout)> {
    let layout = params.layout(image.width, image.height)?;
    let g = gradients(image)?;
    let (mag, ang) = magnitude_angle(&g);
    let bins = params.bins;
    let bin_width = 180.0 / bins as f64;
    let mut hist = vec![0.0; layout.cells_x * layout.cells_y * bins];
    for y in 0..image.height {
        let cy = y / params.cell_size;
        for x in 0..image.width {
            let m = mag[y * image.width + x];
            if m == 0.0 {
                continue;
            }
            let cx = x / params.cell_size;
            let pos = ang[y * image.width + x] / bin_width - 0.5;
            let lo = pos.floor();
            let frac = pos - lo;
            let b0 = (lo as isize).rem_euclid(bins as isize) as usize;
            let b1 = (b0 + 1) % bins;
            let cell = &mut hist[(cy * layout.cells_x + cx) * bins..][..bins];
            cell[b0] += (1.0 - frac) * m;
            cell[b1] += frac * m;
        }
    }
    Ok((hist, layout))
}

pub fn hog_descriptor(image: &Plane, params: &HogParams) -> Result<HogDescriptor> {
    let (hist, layout) = cell_histograms(image, params)?;
    let bins = params.bins;
    let bs = params.block_size;
    let mut values = Vec::with_capacity(layout.len());
    let mut block = Vec::with_capacity(layout.block_cells * bins);
    for by in 0..layout.blocks_y {
        for bx in 0..layout.blocks_x {
            block.clear();
            for cy in by * params.block_stride..by * params.block_stride + bs {
                for cx in bx * params.block_stride..bx * params.block_stride + bs {
                    let start = (cy * layout.cells_x + cx) * bins;
                    block.extend_from_slice(&hist[start..start + bins]);
                }
            }
            let norm = (block.iter().map(|v| v * v).sum::<f64>()
                + params.epsilon * params.epsilon)
                .sqrt();
            if norm > 0.0 {
                values.extend(block.iter().map(|v| v / norm));
            } else {
                values.extend(block.iter().map(|_| 0.0));
            }
        }
    }
    Ok(HogDescriptor { values, layout })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(w: usize, h: usize, seed: u64) -> Plane {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Plane::new(w, h, (0..w * h).map(|_| rng.gen_range(0..256) as f64).collect()).unwrap()
    }

    #[test]
    fn constant_image_has_zero_gradient() {
        let g = gradients(&Plane::new(5, 4, vec![3.0; 20]).unwrap()).unwrap();
        assert!(g.ix.iter().chain(&g.iy).all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_gradient_sign_convention() {
        let p = Plane::new(6, 4, (0..24).map(|i| (i % 6) as f64).collect()).unwrap();
        let g = gradients(&p).unwrap();
        for y in 0..4 {
            for x in 1..5 {
                assert_eq!(g.ix[y * 6 + x], -2.0);
                assert_eq!(g.iy[y * 6 + x], 0.0);
            }
        }
        // replicated edge halves the central difference
        assert_eq!(g.ix[0], -1.0);
    }

    #[test]
    fn gradients_match_per_pixel_loop() {
        let p = random_plane(5, 5, 3);
        let g = gradients(&p).unwrap();
        let at = |x: isize, y: isize| p.get(x.clamp(0, 4) as usize, y.clamp(0, 4) as usize);
        for y in 0..5isize {
            for x in 0..5isize {
                let i = (y * 5 + x) as usize;
                assert_eq!(g.ix[i], at(x - 1, y) - at(x + 1, y));
                assert_eq!(g.iy[i], at(x, y - 1) - at(x, y + 1));
            }
        }
    }

    #[test]
    fn too_small_image() {
        assert!(gradients(&Plane::zeros(2, 5)).is_err());
    }

    #[test]
    fn magnitude_and_angle_examples() {
        let field = |ix: f64, iy: f64| GradientField {
            width: 1,
            height: 1,
            ix: vec![ix],
            iy: vec![iy],
        };
        let (m, a) = magnitude_angle(&field(3.0, 4.0));
        assert_eq!(m[0], 5.0);
        assert!((a[0] - (0.75f64).atan().to_degrees()).abs() < 1e-12);
        let (m, a) = magnitude_angle(&field(0.0, 0.0));
        assert_eq!((m[0], a[0]), (0.0, 0.0));
        let (_, a) = magnitude_angle(&field(1.0, 1.0));
        assert!((a[0] - 45.0).abs() < 1e-12);
        // opposite vectors share an unsigned orientation
        let (_, a) = magnitude_angle(&field(-1.0, -1.0));
        assert!((a[0] - 45.0).abs() < 1e-9);
        let (_, a) = magnitude_angle(&field(0.0, -2.0));
        assert_eq!(a[0], 0.0);
    }

    #[test]
    fn uniform_image_gives_zero_descriptor() {
        let d = hog_descriptor(&Plane::new(16, 16, vec![90.0; 256]).unwrap(), &HogParams::default())
            .unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_layout_length() {
        let p = HogParams::default();
        assert_eq!(p.descriptor_len(64, 64).unwrap(), 7 * 7 * 4 * 9);
        let d = hog_descriptor(&random_plane(64, 64, 1), &p).unwrap();
        assert_eq!(d.values.len(), 1764);
    }

    #[test]
    fn incompatible_dims() {
        assert!(matches!(
            hog_descriptor(&Plane::zeros(30, 32), &HogParams::default()),
            Err(Error::Dimension(_))
        ));
        assert!(hog_descriptor(&Plane::zeros(8, 8), &HogParams::default()).is_err());
    }

    #[test]
    fn values_are_unit_bounded() {
        let d = hog_descriptor(&random_plane(32, 32, 8), &HogParams::default()).unwrap();
        assert!(d.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for block in d.values.chunks(36) {
            let n: f64 = block.iter().map(|v| v * v).sum();
            assert!(n <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn vote_splits_between_neighbouring_bins() {
        // a single horizontal step: IY = 0, IX != 0 => orientation 90 degrees
        let mut data = vec![0.0; 64];
        for y in 0..8 {
            for x in 4..8 {
                data[y * 8 + x] = 10.0;
            }
        }
        let p = HogParams {
            cell_size: 8,
            block_size: 1,
            ..Default::default()
        };
        let (hist, _) = cell_histograms(&Plane::new(8, 8, data).unwrap(), &p).unwrap();
        // 90 degrees lies at the centre of bin 4 (80..100)
        assert!(hist[4] > 0.0);
        assert!(hist.iter().enumerate().all(|(b, &v)| b == 4 || v.abs() < 1e-9));
    }
}
