use crate::error::{Error, Result};

/// An 8-bit image with one (grayscale) or three (RGB) interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Param(format!(
                "frame must be at least 1x1, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Param(format!(
                "frame must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "{width}x{height}x{channels} frame needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Frame {
            width: width.max(1),
            height: height.max(1),
            channels: 1,
            data: vec![value; width.max(1) * height.max(1)],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// (width, height, channels)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    /// Channel `c` of the pixel at column `x`, row `y`.
    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Intensity of a grayscale pixel.
    #[inline]
    pub fn luma(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Grayscale copy: channels averaged and rounded to the nearest integer.
    pub fn to_gray(&self) -> Frame {
        if self.is_gray() {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|px| ((px[0] as u32 + px[1] as u32 + px[2] as u32 + 1) / 3) as u8)
            .collect();
        Frame {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    pub fn to_plane(&self) -> Plane {
        let gray = self.to_gray();
        Plane {
            width: gray.width,
            height: gray.height,
            data: gray.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

/// A single-channel floating-point image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} plane needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Plane {
        let mut out = Vec::with_capacity(w * h);
        for row in y..y + h {
            out.extend_from_slice(&self.data[row * self.width + x..row * self.width + x + w]);
        }
        Plane {
            width: w,
            height: h,
            data: out,
        }
    }

    /// Bilinear resampling with pixel centres aligned and edges clamped.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Plane {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let mut out = Vec::with_capacity(width * height);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = fy - y0 as f64;
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = fx - x0 as f64;
                let top = self.get(x0, y0) * (1.0 - tx) + self.get(x1, y0) * tx;
                let bottom = self.get(x0, y1) * (1.0 - tx) + self.get(x1, y1) * tx;
                out.push(top * (1.0 - ty) + bottom * ty);
            }
        }
        Plane {
            width,
            height,
            data: out,
        }
    }

    /// Rounds and clamps into an 8-bit grayscale frame.
    pub fn to_frame(&self) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self
                .data
                .iter()
                .map(|v| v.round().clamp(0.0, 255.0) as u8)
                .collect(),
        }
    }
}

/// An ordered clip of equally sized frames.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Frame>,
    /// Index of each frame in the original clip.
    pub indices: Vec<usize>,
    pub sample_id: String,
    /// Frames per second; metadata only.
    pub nominal_rate: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, sample_id: impl Into<String>, nominal_rate: f64) -> Result<Self> {
        let indices = (0..frames.len()).collect();
        Self::with_indices(frames, indices, sample_id, nominal_rate)
    }

    pub fn with_indices(
        frames: Vec<Frame>,
        indices: Vec<usize>,
        sample_id: impl Into<String>,
        nominal_rate: f64,
    ) -> Result<Self> {
        let sample_id = sample_id.into();
        let first = frames
            .first()
            .ok_or_else(|| Error::Data(format!("{sample_id}: no frames found")))?;
        let dims = first.dims();
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != dims) {
            return Err(Error::Dimension(format!(
                "{sample_id}: frame {i} is {:?}, expected {:?}",
                f.dims(),
                dims
            )));
        }
        if indices.len() != frames.len() {
            return Err(Error::Dimension(format!(
                "{sample_id}: {} indices for {} frames",
                indices.len(),
                frames.len()
            )));
        }
        Ok(FrameSequence {
            frames,
            indices,
            sample_id,
            nominal_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// (width, height, channels) shared by every frame.
    pub fn dims(&self) -> (usize, usize, usize) {
        self.frames[0].dims()
    }
}
