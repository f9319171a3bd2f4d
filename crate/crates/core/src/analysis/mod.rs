//! Encoder-side noise modeling.
//!
//! Per channel the pipeline is: extract the noise layer, measure block RMS
//! energy (the SDE map), divide the noise by its block energy, concatenate
//! rows (horizontal) and columns (vertical) into 1-D signals, and fit an
//! order-`p` linear predictor to each.

mod lpc;

pub use lpc::{autocorrelation, from_lar, levinson_durbin, step_down, step_up, to_lar, SpectralEnvelope};

use crate::types::{chroma_beta, sde_grid_dims, ChromaLayout, Frame, ModelConfig, Plane};
use crate::{Error, Result};

/// Largest reflection magnitude kept before LAR conversion.
pub const REFLECTION_LIMIT: f64 = 0.999;

/// Signed residual `N = I - V`, one plane per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseLayer {
    planes: Vec<Plane<f64>>,
    layout: ChromaLayout,
}

impl NoiseLayer {
    pub fn new(planes: Vec<Plane<f64>>, layout: ChromaLayout) -> Result<Self> {
        let Some(luma) = planes.first() else {
            return Err(Error::InvalidPlane("noise layer has no planes".into()));
        };
        let expected = layout.plane_dims(luma.width(), luma.height());
        let actual: Vec<_> = planes.iter().map(Plane::dims).collect();
        if expected != actual {
            return Err(Error::GeometryMismatch(format!(
                "{layout:?} noise layer expects planes {expected:?}, got {actual:?}"
            )));
        }
        Ok(Self { planes, layout })
    }

    pub fn zeros(width: usize, height: usize, layout: ChromaLayout) -> Self {
        let planes = layout.plane_dims(width, height).into_iter().map(|(w, h)| Plane::filled(w, h, 0.0)).collect();
        Self { planes, layout }
    }

    pub fn planes(&self) -> &[Plane<f64>] {
        &self.planes
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

/// Per-block RMS of a noise plane on a `w_beta x h_beta` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMap {
    beta: usize,
    w_beta: usize,
    h_beta: usize,
    values: Vec<f64>,
}

impl EnergyMap {
    pub fn new(beta: usize, w_beta: usize, h_beta: usize, values: Vec<f64>) -> Result<Self> {
        if beta == 0 || w_beta == 0 || h_beta == 0 || values.len() != w_beta * h_beta {
            return Err(Error::InvalidPlane(format!(
                "energy map {w_beta}x{h_beta} (beta {beta}) with {} values",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidPlane(format!("energy value {v} is not a finite non-negative number")));
        }
        Ok(Self { beta, w_beta, h_beta, values })
    }

    pub fn uniform(beta: usize, w_beta: usize, h_beta: usize, value: f64) -> Self {
        Self::new(beta, w_beta, h_beta, vec![value; w_beta * h_beta]).expect("valid uniform map")
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.w_beta, self.h_beta)
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.values[n * self.w_beta + m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Cell owning pixel `(x, y)`; pixels past the last full block belong
    /// to the nearest edge cell.
    #[inline]
    pub fn cell_of(&self, x: usize, y: usize) -> (usize, usize) {
        ((x / self.beta).min(self.w_beta - 1), (y / self.beta).min(self.h_beta - 1))
    }

    /// Whether this map has the grid `plane` would produce at this beta.
    pub fn fits(&self, plane_w: usize, plane_h: usize) -> bool {
        sde_grid_dims(plane_w, plane_h, self.beta).is_ok_and(|d| d == (self.w_beta, self.h_beta))
    }
}

/// Per-channel model: energy map plus the two directional envelopes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub sde: EnergyMap,
    pub horizontal: SpectralEnvelope,
    pub vertical: SpectralEnvelope,
}

/// Noise model of one frame, one entry per channel in Y, Cb, Cr order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameNoiseModel {
    pub channels: Vec<ChannelModel>,
}

/// `N(x, y) = I(x, y) - V(x, y)` for every channel.
pub fn extract_noise_layer(input: &Frame, base: &Frame) -> Result<NoiseLayer> {
    if input.layout() != base.layout() || input.width() != base.width() || input.height() != base.height() {
        return Err(Error::GeometryMismatch(format!(
            "input {}x{} {:?} vs base {}x{} {:?}",
            input.width(),
            input.height(),
            input.layout(),
            base.width(),
            base.height(),
            base.layout()
        )));
    }
    let planes = input
        .planes()
        .iter()
        .zip(base.planes())
        .map(|(i, v)| {
            let data = i.samples().iter().zip(v.samples()).map(|(&a, &b)| f64::from(a) - f64::from(b)).collect();
            Plane::new(i.width(), i.height(), data).expect("same dims")
        })
        .collect();
    NoiseLayer::new(planes, input.layout())
}

/// Block RMS map with `beta x beta` blocks; trailing partial blocks are not
/// measured.
pub fn compute_sde(noise: &Plane<f64>, beta: usize) -> Result<EnergyMap> {
    let (wb, hb) = sde_grid_dims(noise.width(), noise.height(), beta)?;
    let mut sums = vec![0.0; wb * hb];
    for y in 0..hb * beta {
        let n = y / beta;
        let row = &noise.row(y)[..wb * beta];
        for (m, chunk) in row.chunks_exact(beta).enumerate() {
            sums[n * wb + m] += chunk.iter().map(|v| v * v).sum::<f64>();
        }
    }
    let inv = 1.0 / (beta * beta) as f64;
    let values = sums.into_iter().map(|s| (s * inv).sqrt()).collect();
    EnergyMap::new(beta, wb, hb, values)
}

/// Divides each sample by its (clamped) block energy, floored at `epsilon`.
pub fn normalize_noise(noise: &Plane<f64>, map: &EnergyMap, epsilon: f64) -> Plane<f64> {
    let mut out = noise.clone();
    for y in 0..noise.height() {
        let row = out.row_mut(y);
        for (x, v) in row.iter_mut().enumerate() {
            let (m, n) = map.cell_of(x, y);
            *v /= map.get(m, n).max(epsilon);
        }
    }
    out
}

/// Rows `y = 0, 1, ...` laid end to end.
pub fn concat_rows(plane: &Plane<f64>) -> Vec<f64> {
    plane.samples().to_vec()
}

/// Columns `x = 0, 1, ...` laid end to end.
pub fn concat_cols(plane: &Plane<f64>) -> Vec<f64> {
    let (w, h) = plane.dims();
    let s = plane.samples();
    let mut out = Vec::with_capacity(w * h);
    for x in 0..w {
        out.extend((0..h).map(|y| s[y * w + x]));
    }
    out
}

/// Inverse of [`concat_cols`].
pub fn from_cols(width: usize, height: usize, signal: &[f64]) -> Plane<f64> {
    assert_eq!(signal.len(), width * height);
    Plane::from_fn(width, height, |x, y| signal[x * height + y])
}

fn fit_envelope(signal: &[f64], order: usize) -> Result<SpectralEnvelope> {
    let rho = autocorrelation(signal, order)?;
    match levinson_durbin(&rho) {
        Ok(env) => Ok(env.clamp_reflection(REFLECTION_LIMIT)),
        Err(Error::DegenerateSignal(_)) => Ok(SpectralEnvelope::identity(order)),
        Err(e) => Err(e),
    }
}

/// Models one channel plane with a given block size.
pub fn analyze_plane(noise: &Plane<f64>, beta: usize, cfg: &ModelConfig) -> Result<ChannelModel> {
    let sde = compute_sde(noise, beta)?;
    let normalized = normalize_noise(noise, &sde, cfg.sde_epsilon);
    let horizontal = fit_envelope(&concat_rows(&normalized), cfg.order)?;
    let vertical = fit_envelope(&concat_cols(&normalized), cfg.order)?;
    Ok(ChannelModel { sde, horizontal, vertical })
}

/// Block size for channel `index` of a frame with the given luma width.
pub fn channel_beta(beta: usize, luma_width: usize, plane_width: usize) -> usize {
    chroma_beta(beta, luma_width, plane_width)
}

/// Models every channel of a noise-layer frame.
pub fn analyze_frame(noise: &NoiseLayer, cfg: &ModelConfig) -> Result<FrameNoiseModel> {
    cfg.validate()?;
    let luma_w = noise.width();
    let channels = noise
        .planes()
        .iter()
        .map(|plane| analyze_plane(plane, channel_beta(cfg.beta, luma_w, plane.width()), cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameNoiseModel { channels })
}
