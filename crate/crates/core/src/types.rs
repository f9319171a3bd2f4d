//! Shared data model: planes, frames, sequences and the two configuration
//! records.
//!
//! Indexing is row-major and zero-based everywhere, with `(x, y)` meaning
//! `(column, row)`.

use crate::{Error, Result};

/// A 2-D grid of samples.
///
/// Video planes use `Plane<u8>`; noise-layer planes use `Plane<f64>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidPlane(format!("dimensions must be positive, got {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::InvalidPlane(format!(
                "{width}x{height} plane needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// A plane with every sample set to `value`.
    ///
    /// # Panics
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    /// Sample at `(x, y)` with coordinates clamped to the plane edges.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, y: usize) -> &mut [T] {
        &mut self.data[y * self.width..(y + 1) * self.width]
    }

    #[inline]
    pub fn samples(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_samples(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> Plane<U> {
        Plane { width: self.width, height: self.height, data: self.data.iter().copied().map(f).collect() }
    }
}

/// Chroma subsampling of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChromaLayout {
    Mono,
    Yuv420,
    Yuv444,
}

impl ChromaLayout {
    pub fn plane_count(self) -> usize {
        match self {
            ChromaLayout::Mono => 1,
            ChromaLayout::Yuv420 | ChromaLayout::Yuv444 => 3,
        }
    }

    /// Dimensions of every plane for a frame of the given luma size, in
    /// Y, Cb, Cr order.
    pub fn plane_dims(self, width: usize, height: usize) -> Vec<(usize, usize)> {
        match self {
            ChromaLayout::Mono => vec![(width, height)],
            ChromaLayout::Yuv444 => vec![(width, height); 3],
            ChromaLayout::Yuv420 => {
                let c = (width.div_ceil(2), height.div_ceil(2));
                vec![(width, height), c, c]
            }
        }
    }

    /// Number of bytes of one 8-bit frame.
    pub fn frame_bytes(self, width: usize, height: usize) -> usize {
        self.plane_dims(width, height).iter().map(|(w, h)| w * h).sum()
    }
}

/// One picture: Y plane followed by Cb and Cr when present.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    planes: Vec<Plane<u8>>,
    layout: ChromaLayout,
}

impl Frame {
    pub fn new(planes: Vec<Plane<u8>>, layout: ChromaLayout) -> Result<Self> {
        let Some(luma) = planes.first() else {
            return Err(Error::InvalidPlane("frame has no planes".into()));
        };
        let expected = layout.plane_dims(luma.width(), luma.height());
        let actual: Vec<_> = planes.iter().map(Plane::dims).collect();
        if expected != actual {
            return Err(Error::GeometryMismatch(format!(
                "{layout:?} frame expects planes {expected:?}, got {actual:?}"
            )));
        }
        Ok(Self { planes, layout })
    }

    /// A frame with every sample of every plane set to `value`.
    pub fn filled(width: usize, height: usize, layout: ChromaLayout, value: u8) -> Self {
        let planes = layout.plane_dims(width, height).into_iter().map(|(w, h)| Plane::filled(w, h, value)).collect();
        Self { planes, layout }
    }

    pub fn planes(&self) -> &[Plane<u8>] {
        &self.planes
    }

    pub fn planes_mut(&mut self) -> &mut [Plane<u8>] {
        &mut self.planes
    }

    pub fn into_planes(self) -> Vec<Plane<u8>> {
        self.planes
    }

    pub fn layout(&self) -> ChromaLayout {
        self.layout
    }

    pub fn width(&self) -> usize {
        self.planes[0].width()
    }

    pub fn height(&self) -> usize {
        self.planes[0].height()
    }
}

/// An ordered list of frames sharing geometry, layout and frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    width: usize,
    height: usize,
    layout: ChromaLayout,
    fps_num: u32,
    fps_den: u32,
    frames: Vec<Frame>,
}

impl VideoSequence {
    /// An empty sequence with fixed geometry.
    pub fn new(width: usize, height: usize, layout: ChromaLayout, fps_num: u32, fps_den: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidPlane(format!("dimensions must be positive, got {width}x{height}")));
        }
        if fps_num == 0 || fps_den == 0 {
            return Err(Error::InvalidConfig(format!("frame rate {fps_num}/{fps_den} must have positive terms")));
        }
        Ok(Self { width, height, layout, fps_num, fps_den, frames: Vec::new() })
    }

    pub fn from_frames(frames: Vec<Frame>, fps_num: u32, fps_den: u32) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::InvalidPlane("sequence has no frames".into()));
        };
        let mut seq = Self::new(first.width(), first.height(), first.layout(), fps_num, fps_den)?;
        for frame in frames {
            seq.push(frame)?;
        }
        Ok(seq)
    }

    pub fn push(&mut self, frame: Frame) -> Result<()> {
        if frame.width() != self.width || frame.height() != self.height || frame.layout() != self.layout {
            return Err(Error::GeometryMismatch(format!(
                "frame {}x{} {:?} does not match sequence {}x{} {:?}",
                frame.width(),
                frame.height(),
                frame.layout(),
                self.width,
                self.height,
                self.layout
            )));
        }
        self.frames.push(frame);
        Ok(())
    }

    /// Same geometry and frame rate, different frames.
    pub fn with_frames(&self, frames: Vec<Frame>) -> Result<Self> {
        let mut seq = Self::new(self.width, self.height, self.layout, self.fps_num, self.fps_den)?;
        for frame in frames {
            seq.push(frame)?;
        }
        Ok(seq)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn layout(&self) -> ChromaLayout {
        self.layout
    }

    pub fn fps(&self) -> (u32, u32) {
        (self.fps_num, self.fps_den)
    }

    pub fn fps_f64(&self) -> f64 {
        f64::from(self.fps_num) / f64::from(self.fps_den)
    }

    pub fn same_geometry(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.layout == other.layout
    }
}

/// Parameters of the noise model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// SDE block size in luma pixels.
    pub beta: usize,
    /// Prediction order of each spectral envelope.
    pub order: usize,
    pub master_seed: u64,
    /// Half-range of the uniform LAR quantizer.
    pub lar_range: f64,
    /// Floor applied to block energy before dividing by it.
    pub sde_epsilon: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { beta: 30, order: 10, master_seed: 0, lar_range: 8.0, sde_epsilon: 1e-6 }
    }
}

impl ModelConfig {
    pub const MAX_ORDER: usize = 32;

    pub fn validate(&self) -> Result<()> {
        if self.beta < 2 {
            return Err(Error::InvalidConfig(format!("beta must be >= 2, got {}", self.beta)));
        }
        if !(1..=Self::MAX_ORDER).contains(&self.order) {
            return Err(Error::InvalidConfig(format!(
                "prediction order must be in 1..={}, got {}",
                Self::MAX_ORDER,
                self.order
            )));
        }
        if !(self.lar_range > 0.0 && self.lar_range.is_finite()) {
            return Err(Error::InvalidConfig(format!("lar_range must be positive, got {}", self.lar_range)));
        }
        if !(self.sde_epsilon > 0.0 && self.sde_epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("sde_epsilon must be positive, got {}", self.sde_epsilon)));
        }
        Ok(())
    }
}

/// Parameters of the motion-compensated temporal denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseConfig {
    /// Neighbors used on each side of the current frame.
    pub k_frames: usize,
    /// Block-matching block size in pixels.
    pub block: usize,
    pub search_radius: usize,
    /// Decay of the similarity weight, in per-pixel SAD units.
    pub lambda: f64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self { k_frames: 3, block: 16, search_radius: 8, lambda: 4.0 }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_frames < 1 {
            return Err(Error::InvalidConfig("k_frames must be >= 1".into()));
        }
        if self.block < 4 {
            return Err(Error::InvalidConfig(format!("block must be >= 4, got {}", self.block)));
        }
        if self.search_radius < 1 {
            return Err(Error::InvalidConfig("search_radius must be >= 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Block size to use on a plane whose extent along one axis is `plane_dim`
/// when the luma extent is `luma_dim`, so SDE cells line up across channels.
pub fn chroma_beta(beta: usize, luma_dim: usize, plane_dim: usize) -> usize {
    debug_assert!(luma_dim >= 1);
    (beta * plane_dim / luma_dim).max(1)
}

/// SDE grid dimensions `(W_beta, H_beta)` of a plane.
pub fn sde_grid_dims(plane_w: usize, plane_h: usize, beta: usize) -> Result<(usize, usize)> {
    if beta == 0 {
        return Err(Error::InvalidConfig("block size must be positive".into()));
    }
    let dims = (plane_w / beta, plane_h / beta);
    if dims.0 == 0 || dims.1 == 0 {
        return Err(Error::UnusableGeometry { width: plane_w, height: plane_h, beta });
    }
    Ok(dims)
}
