//! Decoder-side noise synthesis.
//!
//! For each channel: draw a seeded white Gaussian plane, shape it with the
//! horizontal then the vertical all-pole filter (state flowing across the
//! concatenated rows/columns), and scale each SDE block to its decoded RMS.

use rayon::prelude::*;

use crate::analysis::{concat_cols, from_cols, EnergyMap, FrameNoiseModel, NoiseLayer, SpectralEnvelope};
use crate::rng::{stream_seed, GaussianSource};
use crate::types::{ChromaLayout, Frame, Plane};
use crate::{Error, Result};

/// Master seed and the per-(frame, channel) derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NoiseSeedPolicy {
    pub master_seed: u64,
}

impl NoiseSeedPolicy {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn stream_seed(&self, frame_index: u64, channel_index: u64) -> u64 {
        stream_seed(self.master_seed, frame_index, channel_index)
    }
}

/// I.i.d. standard normal plane from one seeded stream, row-major.
pub fn gaussian_plane(width: usize, height: usize, seed: u64) -> Plane<f64> {
    let mut src = GaussianSource::new(seed);
    Plane::from_fn(width, height, |_, _| src.next_normal())
}

/// `y(k) = x(k) + sum_j a_j y(k - j)` with zero initial state.
pub fn iir_filter_1d(signal: &[f64], a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(signal.len());
    for (k, &x) in signal.iter().enumerate() {
        let mut y = x;
        for (j, &aj) in a.iter().enumerate().take(k) {
            y += aj * out[k - 1 - j];
        }
        out.push(y);
    }
    out
}

/// Horizontal pass over the row-concatenated signal, then vertical pass over
/// the column-concatenated result.
pub fn shape_noise(plane: &Plane<f64>, horizontal: &SpectralEnvelope, vertical: &SpectralEnvelope) -> Plane<f64> {
    let (w, h) = plane.dims();
    let rows = iir_filter_1d(plane.samples(), horizontal.a());
    let after_h = Plane::new(w, h, rows).expect("same size");
    let cols = iir_filter_1d(&concat_cols(&after_h), vertical.a());
    from_cols(w, h, &cols)
}

/// Rescales every SDE block to the map's RMS value.
///
/// The gain of a cell is `sde / rms(beta x beta block)`; it also applies to
/// the edge pixels assigned to that cell. Blocks whose RMS is below
/// `epsilon` come out as zeros.
pub fn apply_sde(shaped: &Plane<f64>, map: &EnergyMap, epsilon: f64) -> Result<Plane<f64>> {
    let (w, h) = shaped.dims();
    if !map.fits(w, h) {
        return Err(Error::GeometryMismatch(format!(
            "energy map {:?} (beta {}) does not fit a {w}x{h} plane",
            map.dims(),
            map.beta()
        )));
    }
    let beta = map.beta();
    let (wb, hb) = map.dims();
    let mut sums = vec![0.0; wb * hb];
    for y in 0..hb * beta {
        let n = y / beta;
        for (m, chunk) in shaped.row(y)[..wb * beta].chunks_exact(beta).enumerate() {
            sums[n * wb + m] += chunk.iter().map(|v| v * v).sum::<f64>();
        }
    }
    let inv = 1.0 / (beta * beta) as f64;
    let gains: Vec<f64> = sums
        .iter()
        .zip(map.values())
        .map(|(&s, &target)| {
            let rms = (s * inv).sqrt();
            if rms < epsilon {
                0.0
            } else {
                target / rms
            }
        })
        .collect();

    let mut out = shaped.clone();
    for y in 0..h {
        for (x, v) in out.row_mut(y).iter_mut().enumerate() {
            let (m, n) = map.cell_of(x, y);
            *v *= gains[n * wb + m];
        }
    }
    Ok(out)
}

/// Synthesizes the noise layer of frame `frame_index` from a decoded model.
pub fn synthesize_frame(
    model: &FrameNoiseModel,
    width: usize,
    height: usize,
    layout: ChromaLayout,
    seeds: NoiseSeedPolicy,
    frame_index: u64,
    epsilon: f64,
) -> Result<NoiseLayer> {
    let dims = layout.plane_dims(width, height);
    if dims.len() != model.channels.len() {
        return Err(Error::GeometryMismatch(format!(
            "model has {} channels, {layout:?} frame has {}",
            model.channels.len(),
            dims.len()
        )));
    }
    let planes = dims
        .par_iter()
        .zip(model.channels.par_iter())
        .enumerate()
        .map(|(c, (&(w, h), ch))| {
            let white = gaussian_plane(w, h, seeds.stream_seed(frame_index, c as u64));
            let shaped = shape_noise(&white, &ch.horizontal, &ch.vertical);
            apply_sde(&shaped, &ch.sde, epsilon)
        })
        .collect::<Result<Vec<_>>>()?;
    NoiseLayer::new(planes, layout)
}

/// `clamp(round(V + N), 0, 255)` for every sample.
pub fn recombine(base: &Frame, noise: &NoiseLayer) -> Result<Frame> {
    if base.layout() != noise.layout() || base.width() != noise.width() || base.height() != noise.height() {
        return Err(Error::GeometryMismatch(format!(
            "base {}x{} {:?} vs noise {}x{} {:?}",
            base.width(),
            base.height(),
            base.layout(),
            noise.width(),
            noise.height(),
            noise.layout()
        )));
    }
    let planes = base
        .planes()
        .iter()
        .zip(noise.planes())
        .map(|(v, n)| {
            let data = v
                .samples()
                .iter()
                .zip(n.samples())
                .map(|(&b, &d)| (f64::from(b) + d).round().clamp(0.0, 255.0) as u8)
                .collect();
            Plane::new(v.width(), v.height(), data).expect("same dims")
        })
        .collect();
    Frame::new(planes, base.layout())
}
