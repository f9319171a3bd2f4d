//! JSON and CSV report emission.
//!
//! Schemas:
//! - `bitrate.csv`: `component,kbps` rows for `se`, `sde` and `total`.
//! - `spectrum_<direction>.csv`: `freq,periodogram_db,envelope_db`, with
//!   frequency in cycles per sample and the envelope gain-aligned to the
//!   periodogram.
//! - roundtrip JSON: schema tag `grain-model.roundtrip/1`, see
//!   [`RoundtripReport`]. Infinite PSNR is written as the string `"inf"`.

use anyhow::{bail, Context, Result};
use grainmodel::analysis::{compute_sde, extract_noise_layer, normalize_noise, NoiseLayer};
use grainmodel::bitstream::{dequantize_frame, model_bitrate_report, BitrateReport, ModelStream, QuantizedEnergyMap};
use grainmodel::metrics::{block_rms_error, psnr, spectrum_report, Direction, SpectrumReport, DEFAULT_WINDOW};
use grainmodel::types::Plane;
use grainmodel::{ModelConfig, VideoSequence};
use serde::{Serialize, Serializer};

use crate::args::DecoderArgs;

pub const ROUNDTRIP_SCHEMA: &str = "grain-model.roundtrip/1";

pub fn bitrate_csv(r: &BitrateReport) -> String {
    format!("component,kbps\nse,{:.3}\nsde,{:.3}\ntotal,{:.3}\n", r.se_kbps, r.sde_kbps, r.total_kbps)
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundtripReport {
    pub schema: &'static str,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub layout: String,
    pub fps: f64,
    pub encoder_hook: bool,
    pub bitrate_kbps: Bitrates,
    /// Decoded SDE against the analysis SDE of the noise layer.
    pub sde_error: SdeError,
    /// RMS of the synthesized noise (after rounding and clipping) against
    /// the decoded SDE.
    pub recon_sde_error: ErrorSummary,
    /// Luma PSNR of the decoded base against the denoised base, averaged
    /// over frames.
    #[serde(serialize_with = "number_or_inf")]
    pub base_psnr_db: f64,
    /// Luma PSNR of the reconstruction against the input.
    #[serde(serialize_with = "number_or_inf")]
    pub recon_psnr_db: f64,
    /// Log-spectral distance of the first frame's normalized luma noise
    /// against the decoded envelopes; null when the plane is too small.
    pub spectra: Vec<SpectrumSummary>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Bitrates {
    pub se: f64,
    pub sde: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorSummary {
    pub max_abs: f64,
    #[serde(serialize_with = "number_or_inf")]
    pub max_rel: f64,
    #[serde(serialize_with = "number_or_inf")]
    pub mean_rel: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SdeError {
    pub max_abs: f64,
    #[serde(serialize_with = "number_or_inf")]
    pub max_rel: f64,
    #[serde(serialize_with = "number_or_inf")]
    pub mean_rel: f64,
    /// Worst-case absolute error of the 8-bit max-scaled quantizer.
    pub quantizer_bound: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub direction: &'static str,
    pub log_spectral_distance_db: Option<f64>,
}

fn number_or_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

/// Absolute error bound of [`QuantizedEnergyMap`] codes: half a code step
/// plus the f32 rounding of the scale.
pub fn sde_quantizer_bound(q: &QuantizedEnergyMap) -> f64 {
    let s = f64::from(q.scale);
    0.5 * s / 255.0 + s * f64::from(f32::EPSILON) + 1e-12
}

/// Mean luma PSNR over the frames that differ; infinite when none do.
fn mean_luma_psnr(a: &VideoSequence, b: &VideoSequence) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        let p = psnr(&fa.planes()[0], &fb.planes()[0])?;
        if p.is_finite() {
            sum += p;
            n += 1;
        }
    }
    Ok(if n == 0 { f64::INFINITY } else { sum / n as f64 })
}

fn merge(acc: &mut ErrorSummary, e: grainmodel::metrics::BlockRmsError, cells: usize, total: &mut usize) {
    acc.max_abs = acc.max_abs.max(e.max_abs);
    acc.max_rel = acc.max_rel.max(e.max_rel);
    acc.mean_rel += e.mean_rel * cells as f64;
    *total += cells;
}

pub fn roundtrip_report(
    input: &VideoSequence,
    base: &VideoSequence,
    decoded_base: &VideoSequence,
    recon: &VideoSequence,
    stream: &ModelStream,
    cfg: &ModelConfig,
    hook: bool,
) -> Result<RoundtripReport> {
    let rates = model_bitrate_report(stream);
    let zero = ErrorSummary { max_abs: 0.0, max_rel: 0.0, mean_rel: 0.0 };
    let (mut sde, mut rec) = (zero, zero);
    let (mut sde_cells, mut rec_cells) = (0, 0);
    let mut within = true;
    let mut bound = 0.0f64;
    let mut spectra = Vec::new();

    for (f, q) in stream.frames.iter().enumerate() {
        let model = dequantize_frame(q, cfg.lar_range);
        let noise = extract_noise_layer(&input.frames()[f], &base.frames()[f])?;
        let synth = extract_noise_layer(&recon.frames()[f], &decoded_base.frames()[f])?;
        for (c, ch) in model.channels.iter().enumerate() {
            let beta = ch.sde.beta();
            let measured = compute_sde(&noise.planes()[c], beta)?;
            let e = block_rms_error(&ch.sde, &measured)?;
            let b = sde_quantizer_bound(&q.channels[c].sde);
            bound = bound.max(b);
            within &= e.max_abs <= b;
            merge(&mut sde, e, ch.sde.values().len(), &mut sde_cells);

            let resynth = compute_sde(&synth.planes()[c], beta)?;
            merge(&mut rec, block_rms_error(&resynth, &ch.sde)?, ch.sde.values().len(), &mut rec_cells);
        }
        if f == 0 {
            let ch = &model.channels[0];
            let normalized = normalize_noise(&noise.planes()[0], &ch.sde, cfg.sde_epsilon);
            for (dir, env) in [(Direction::Horizontal, &ch.horizontal), (Direction::Vertical, &ch.vertical)] {
                let lsd = spectrum_report(&normalized, env, dir, DEFAULT_WINDOW).ok().map(|r| r.log_spectral_distance);
                spectra.push(SpectrumSummary { direction: dir.name(), log_spectral_distance_db: lsd });
            }
        }
    }
    if sde_cells > 0 {
        sde.mean_rel /= sde_cells as f64;
    }
    if rec_cells > 0 {
        rec.mean_rel /= rec_cells as f64;
    }

    Ok(RoundtripReport {
        schema: ROUNDTRIP_SCHEMA,
        frames: input.len(),
        width: input.width(),
        height: input.height(),
        layout: format!("{:?}", input.layout()),
        fps: input.fps_f64(),
        encoder_hook: hook,
        bitrate_kbps: Bitrates { se: rates.se_kbps, sde: rates.sde_kbps, total: rates.total_kbps },
        sde_error: SdeError {
            max_abs: sde.max_abs,
            max_rel: sde.max_rel,
            mean_rel: sde.mean_rel,
            quantizer_bound: bound,
            within_bound: within,
        },
        recon_sde_error: rec,
        base_psnr_db: mean_luma_psnr(decoded_base, base)?,
        recon_psnr_db: mean_luma_psnr(recon, input)?,
        spectra,
    })
}

/// Luma noise plane of one frame: `video - base`, or `video - 128` when no
/// base is given.
fn noise_plane(video: &VideoSequence, base: Option<&VideoSequence>, frame: usize) -> Result<Plane<f64>> {
    let Some(v) = video.frames().get(frame) else {
        bail!("noise video has {} frames, frame {frame} requested", video.len());
    };
    match base {
        Some(b) => {
            let Some(bf) = b.frames().get(frame) else {
                bail!("base video has {} frames, frame {frame} requested", b.len());
            };
            let layer: NoiseLayer = extract_noise_layer(v, bf)?;
            Ok(layer.planes()[0].clone())
        }
        None => Ok(v.planes()[0].map(|s| f64::from(s) - 128.0)),
    }
}

/// Per-direction spectrum reports of the luma noise of `frame`, normalized
/// by the decoded energy map and compared with the decoded envelopes.
pub fn spectrum_reports(
    stream: &ModelStream,
    noise: &VideoSequence,
    base: Option<&VideoSequence>,
    frame: usize,
    window: usize,
    decoder: &DecoderArgs,
) -> Result<Vec<SpectrumReport>> {
    let h = &stream.header;
    if noise.width() != h.width as usize || noise.height() != h.height as usize {
        bail!("noise video is {}x{}, model is {}x{}", noise.width(), noise.height(), h.width, h.height);
    }
    let Some(q) = stream.frames.get(frame) else {
        bail!("model has {} frames, frame {frame} requested", stream.frames.len());
    };
    let model = dequantize_frame(q, decoder.lar_range);
    let ch = &model.channels[0];
    let plane = normalize_noise(&noise_plane(noise, base, frame)?, &ch.sde, decoder.sde_epsilon);
    [(Direction::Horizontal, &ch.horizontal), (Direction::Vertical, &ch.vertical)]
        .into_iter()
        .map(|(dir, env)| spectrum_report(&plane, env, dir, window).with_context(|| format!("{} spectrum", dir.name())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_psnr_uses_marker() {
        #[derive(Serialize)]
        struct T {
            #[serde(serialize_with = "number_or_inf")]
            v: f64,
        }
        assert_eq!(serde_json::to_string(&T { v: f64::INFINITY }).unwrap(), r#"{"v":"inf"}"#);
        assert_eq!(serde_json::to_string(&T { v: 1.5 }).unwrap(), r#"{"v":1.5}"#);
    }

    #[test]
    fn bitrate_csv_layout() {
        let r = BitrateReport { channels: 1, frames: 1, fps: 30.0, se_kbps: 4.8, sde_kbps: 1.0, total_kbps: 5.8 };
        assert_eq!(bitrate_csv(&r), "component,kbps\nse,4.800\nsde,1.000\ntotal,5.800\n");
    }
}
