//! The `PNM1` noise-model stream and its bitrate accounting.
//!
//! All integers are little-endian and byte-aligned.
//!
//! ```text
//! header:
//!   magic        4  "PNM1"
//!   version      1  = 1
//!   width        4  u32, luma pixels
//!   height       4  u32
//!   fps_num      4  u32
//!   fps_den      4  u32
//!   layout       1  0 = mono, 1 = 4:2:0, 2 = 4:4:4
//!   beta         2  u16, luma block size
//!   order        1  u8, prediction order p
//!   flags        1  bit 0: seed present; other bits must be zero
//!   seed         8  u64, only when flags bit 0 is set
//!   frame_count  4  u32
//! per frame, per channel (Y, Cb, Cr):
//!   p bytes      horizontal LAR codes
//!   p bytes      vertical LAR codes
//!   4 bytes      f32 energy scale (largest RMS of the map)
//!   Wb*Hb bytes  energy codes, row-major
//! ```
//!
//! A stream has no trailing bytes.

use thiserror::Error;

use crate::analysis::{channel_beta, ChannelModel, EnergyMap, FrameNoiseModel, SpectralEnvelope};
use crate::types::{sde_grid_dims, ChromaLayout, ModelConfig};

pub const MAGIC: [u8; 4] = *b"PNM1";
pub const VERSION: u8 = 1;
const FLAG_SEED: u8 = 0x01;

#[derive(Debug, Error, PartialEq, Eq)]
#[non_exhaustive]
pub enum StreamError {
    #[error("bad magic at byte {offset}: expected \"PNM1\"")]
    BadMagic { offset: usize },

    #[error("unsupported stream version {version} at byte {offset}")]
    UnsupportedVersion { version: u8, offset: usize },

    #[error("invalid header field `{field}` at byte {offset}: {reason}")]
    InvalidHeader { field: &'static str, offset: usize, reason: String },

    #[error("truncated stream at byte {offset}{}", frame.map(|f| format!(" while reading frame {f}")).unwrap_or_default())]
    Truncated { offset: usize, frame: Option<usize> },

    #[error("invalid energy map in frame {frame}, channel {channel} at byte {offset}: {reason}")]
    InvalidEnergyMap { frame: usize, channel: usize, offset: usize, reason: String },

    #[error("{count} unexpected trailing bytes at byte {offset}")]
    TrailingData { offset: usize, count: usize },

    #[error("model does not match stream header: {0}")]
    Inconsistent(String),
}

/// Fixed stream header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub width: u32,
    pub height: u32,
    pub fps_num: u32,
    pub fps_den: u32,
    pub layout: ChromaLayout,
    pub beta: u16,
    pub order: u8,
    pub seed: Option<u64>,
    pub frame_count: u32,
}

/// Block size and grid of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelGrid {
    pub beta: usize,
    pub w_beta: usize,
    pub h_beta: usize,
}

impl StreamHeader {
    pub fn fps(&self) -> f64 {
        f64::from(self.fps_num) / f64::from(self.fps_den)
    }

    pub fn channels(&self) -> usize {
        self.layout.plane_count()
    }

    pub fn encoded_len(&self) -> usize {
        30 + if self.seed.is_some() { 8 } else { 0 }
    }

    /// SDE grid of every channel, or `None` if some plane is smaller than
    /// its block.
    pub fn channel_grids(&self) -> Option<Vec<ChannelGrid>> {
        let (w, h) = (self.width as usize, self.height as usize);
        if w == 0 || h == 0 || self.beta == 0 {
            return None;
        }
        self.layout
            .plane_dims(w, h)
            .into_iter()
            .map(|(pw, ph)| {
                let beta = channel_beta(self.beta as usize, w, pw);
                sde_grid_dims(pw, ph, beta).ok().map(|(w_beta, h_beta)| ChannelGrid { beta, w_beta, h_beta })
            })
            .collect()
    }

    /// Encoded bytes of one frame record.
    pub fn frame_payload_len(&self) -> Option<usize> {
        let grids = self.channel_grids()?;
        grids.iter().try_fold(0usize, |acc, g| {
            let cells = g.w_beta.checked_mul(g.h_beta)?;
            acc.checked_add(2 * self.order as usize + 4 + cells)
        })
    }

    /// Energy-map bytes (scale plus codes) of one frame.
    pub fn frame_sde_len(&self) -> Option<usize> {
        Some(self.channel_grids()?.iter().map(|g| 4 + g.w_beta * g.h_beta).sum())
    }

    fn layout_code(&self) -> u8 {
        match self.layout {
            ChromaLayout::Mono => 0,
            ChromaLayout::Yuv420 => 1,
            ChromaLayout::Yuv444 => 2,
        }
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.fps_num.to_le_bytes());
        out.extend_from_slice(&self.fps_den.to_le_bytes());
        out.push(self.layout_code());
        out.extend_from_slice(&self.beta.to_le_bytes());
        out.push(self.order);
        out.push(if self.seed.is_some() { FLAG_SEED } else { 0 });
        if let Some(seed) = self.seed {
            out.extend_from_slice(&seed.to_le_bytes());
        }
        out.extend_from_slice(&self.frame_count.to_le_bytes());
    }

    fn validate(&self) -> Result<(), StreamError> {
        let bad = |field, offset, reason: String| Err(StreamError::InvalidHeader { field, offset, reason });
        if self.width == 0 {
            return bad("width", 5, "must be positive".into());
        }
        if self.height == 0 {
            return bad("height", 9, "must be positive".into());
        }
        if self.fps_num == 0 {
            return bad("fps_num", 13, "must be positive".into());
        }
        if self.fps_den == 0 {
            return bad("fps_den", 17, "must be positive".into());
        }
        if self.beta < 2 {
            return bad("beta", 22, format!("{} is below 2", self.beta));
        }
        if !(1..=ModelConfig::MAX_ORDER).contains(&(self.order as usize)) {
            return bad("order", 24, format!("{} is outside 1..={}", self.order, ModelConfig::MAX_ORDER));
        }
        if self.channel_grids().is_none() {
            return bad(
                "beta",
                22,
                format!("{}x{} {:?} frame holds no {}-pixel block", self.width, self.height, self.layout, self.beta),
            );
        }
        Ok(())
    }
}

/// 8-bit LAR codes of one envelope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedEnvelope {
    pub codes: Vec<u8>,
}

/// Max-scaled 8-bit energy map.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedEnergyMap {
    pub scale: f32,
    pub grid: ChannelGrid,
    pub codes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedChannel {
    pub horizontal: QuantizedEnvelope,
    pub vertical: QuantizedEnvelope,
    pub sde: QuantizedEnergyMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedFrame {
    pub channels: Vec<QuantizedChannel>,
}

/// A complete decoded or to-be-encoded stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelStream {
    pub header: StreamHeader,
    pub frames: Vec<QuantizedFrame>,
}

/// Width of one LAR quantizer cell.
pub fn lar_step(lar_range: f64) -> f64 {
    2.0 * lar_range / 256.0
}

/// Uniform mid-rise quantizer on `[-lar_range, lar_range)`; out-of-range
/// values clamp to the end codes.
pub fn quantize_lar(lar: f64, lar_range: f64) -> u8 {
    let q = ((lar + lar_range) / lar_step(lar_range)).floor();
    if q.is_nan() {
        return 128;
    }
    q.clamp(0.0, 255.0) as u8
}

pub fn dequantize_lar(code: u8, lar_range: f64) -> f64 {
    (f64::from(code) + 0.5) * lar_step(lar_range) - lar_range
}

/// Reflection-coefficient distance spanned by the LAR cell around `r`.
pub fn reflection_step_at(r: f64, lar_range: f64) -> f64 {
    let step = lar_step(lar_range);
    let lar = ((1.0 - r) / (1.0 + r)).ln();
    let a = crate::analysis::from_lar(lar - step);
    let b = crate::analysis::from_lar(lar + step);
    (a - b).abs() / 2.0
}

pub fn quantize_envelope(env: &SpectralEnvelope, lar_range: f64) -> QuantizedEnvelope {
    QuantizedEnvelope { codes: env.lar().iter().map(|&v| quantize_lar(v, lar_range)).collect() }
}

pub fn dequantize_envelope(q: &QuantizedEnvelope, lar_range: f64) -> SpectralEnvelope {
    SpectralEnvelope::from_lars(q.codes.iter().map(|&c| dequantize_lar(c, lar_range)).collect())
}

pub fn quantize_sde(map: &EnergyMap) -> QuantizedEnergyMap {
    let (w_beta, h_beta) = map.dims();
    let grid = ChannelGrid { beta: map.beta(), w_beta, h_beta };
    let scale = map.max() as f32;
    let s = f64::from(scale);
    let codes = if s > 0.0 {
        map.values().iter().map(|&v| (255.0 * v / s).round().clamp(0.0, 255.0) as u8).collect()
    } else {
        vec![0; map.values().len()]
    };
    QuantizedEnergyMap { scale, grid, codes }
}

pub fn dequantize_sde(q: &QuantizedEnergyMap) -> EnergyMap {
    let s = f64::from(q.scale).max(0.0);
    let values = q.codes.iter().map(|&c| f64::from(c) * s / 255.0).collect();
    EnergyMap::new(q.grid.beta, q.grid.w_beta, q.grid.h_beta, values).expect("grid from header")
}

pub fn quantize_frame(model: &FrameNoiseModel, lar_range: f64) -> QuantizedFrame {
    QuantizedFrame {
        channels: model
            .channels
            .iter()
            .map(|ch| QuantizedChannel {
                horizontal: quantize_envelope(&ch.horizontal, lar_range),
                vertical: quantize_envelope(&ch.vertical, lar_range),
                sde: quantize_sde(&ch.sde),
            })
            .collect(),
    }
}

/// Decoder view of a frame: envelopes rebuilt from the LAR codes.
pub fn dequantize_frame(q: &QuantizedFrame, lar_range: f64) -> FrameNoiseModel {
    FrameNoiseModel {
        channels: q
            .channels
            .iter()
            .map(|ch| ChannelModel {
                sde: dequantize_sde(&ch.sde),
                horizontal: dequantize_envelope(&ch.horizontal, lar_range),
                vertical: dequantize_envelope(&ch.vertical, lar_range),
            })
            .collect(),
    }
}

impl ModelStream {
    /// Checks every frame against the header geometry and order.
    pub fn check_consistency(&self) -> Result<(), StreamError> {
        self.header.validate().map_err(|e| StreamError::Inconsistent(e.to_string()))?;
        if self.frames.len() != self.header.frame_count as usize {
            return Err(StreamError::Inconsistent(format!(
                "header declares {} frames, stream holds {}",
                self.header.frame_count,
                self.frames.len()
            )));
        }
        let grids = self.header.channel_grids().expect("validated");
        let p = self.header.order as usize;
        for (f, frame) in self.frames.iter().enumerate() {
            if frame.channels.len() != grids.len() {
                return Err(StreamError::Inconsistent(format!(
                    "frame {f} has {} channels, expected {}",
                    frame.channels.len(),
                    grids.len()
                )));
            }
            for (c, (ch, grid)) in frame.channels.iter().zip(&grids).enumerate() {
                if ch.horizontal.codes.len() != p || ch.vertical.codes.len() != p {
                    return Err(StreamError::Inconsistent(format!("frame {f} channel {c}: envelope order is not {p}")));
                }
                if ch.sde.grid != *grid || ch.sde.codes.len() != grid.w_beta * grid.h_beta {
                    return Err(StreamError::Inconsistent(format!(
                        "frame {f} channel {c}: energy grid {:?} does not match {grid:?}",
                        ch.sde.grid
                    )));
                }
                if !(ch.sde.scale.is_finite() && ch.sde.scale >= 0.0) {
                    return Err(StreamError::Inconsistent(format!("frame {f} channel {c}: bad scale")));
                }
            }
        }
        Ok(())
    }

    pub fn serialize(&self) -> Result<Vec<u8>, StreamError> {
        self.check_consistency()?;
        let mut out = Vec::with_capacity(
            self.header.encoded_len() + self.frames.len() * self.header.frame_payload_len().unwrap_or(0),
        );
        self.header.write(&mut out);
        for frame in &self.frames {
            for ch in &frame.channels {
                out.extend_from_slice(&ch.horizontal.codes);
                out.extend_from_slice(&ch.vertical.codes);
                out.extend_from_slice(&ch.sde.scale.to_le_bytes());
                out.extend_from_slice(&ch.sde.codes);
            }
        }
        Ok(out)
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, StreamError> {
        let mut rd = Reader { bytes, pos: 0, frame: None };
        let magic = rd.take(4)?;
        if magic != MAGIC {
            return Err(StreamError::BadMagic { offset: 0 });
        }
        let version = rd.u8()?;
        if version != VERSION {
            return Err(StreamError::UnsupportedVersion { version, offset: 4 });
        }
        let width = rd.u32()?;
        let height = rd.u32()?;
        let fps_num = rd.u32()?;
        let fps_den = rd.u32()?;
        let layout = match rd.u8()? {
            0 => ChromaLayout::Mono,
            1 => ChromaLayout::Yuv420,
            2 => ChromaLayout::Yuv444,
            other => {
                return Err(StreamError::InvalidHeader {
                    field: "layout",
                    offset: 21,
                    reason: format!("unknown layout code {other}"),
                })
            }
        };
        let beta = rd.u16()?;
        let order = rd.u8()?;
        let flags = rd.u8()?;
        if flags & !FLAG_SEED != 0 {
            return Err(StreamError::InvalidHeader {
                field: "flags",
                offset: 25,
                reason: format!("reserved bits set in {flags:#04x}"),
            });
        }
        let seed = if flags & FLAG_SEED != 0 { Some(rd.u64()?) } else { None };
        let frame_count = rd.u32()?;
        let header = StreamHeader { width, height, fps_num, fps_den, layout, beta, order, seed, frame_count };
        header.validate()?;

        let grids = header.channel_grids().expect("validated");
        let payload = header.frame_payload_len().ok_or(StreamError::InvalidHeader {
            field: "width",
            offset: 5,
            reason: "frame record size overflows".into(),
        })?;
        // Reject impossible frame counts before allocating anything.
        let remaining = bytes.len() - rd.pos;
        let needed = payload.checked_mul(frame_count as usize);
        if needed.is_none_or(|n| n > remaining) {
            return Err(StreamError::Truncated { offset: bytes.len(), frame: Some(remaining / payload) });
        }

        let p = order as usize;
        let mut frames = Vec::with_capacity(frame_count as usize);
        for f in 0..frame_count as usize {
            rd.frame = Some(f);
            let mut channels = Vec::with_capacity(grids.len());
            for (c, grid) in grids.iter().enumerate() {
                let horizontal = QuantizedEnvelope { codes: rd.take(p)?.to_vec() };
                let vertical = QuantizedEnvelope { codes: rd.take(p)?.to_vec() };
                let scale_offset = rd.pos;
                let scale = f32::from_le_bytes(rd.take(4)?.try_into().expect("4 bytes"));
                let codes = rd.take(grid.w_beta * grid.h_beta)?.to_vec();
                let bad = |reason: &str| StreamError::InvalidEnergyMap {
                    frame: f,
                    channel: c,
                    offset: scale_offset,
                    reason: reason.into(),
                };
                if !(scale.is_finite() && scale >= 0.0) {
                    return Err(bad("scale is not a finite non-negative number"));
                }
                if scale == 0.0 && codes.iter().any(|&c| c != 0) {
                    return Err(bad("zero scale with non-zero codes"));
                }
                channels.push(QuantizedChannel {
                    horizontal,
                    vertical,
                    sde: QuantizedEnergyMap { scale, grid: *grid, codes },
                });
            }
            frames.push(QuantizedFrame { channels });
        }
        if rd.pos != bytes.len() {
            return Err(StreamError::TrailingData { offset: rd.pos, count: bytes.len() - rd.pos });
        }
        Ok(Self { header, frames })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    frame: Option<usize>,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StreamError> {
        if self.bytes.len() - self.pos < n {
            return Err(StreamError::Truncated { offset: self.bytes.len(), frame: self.frame });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, StreamError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, StreamError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, StreamError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, StreamError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Spectral-envelope bitrate in kbit/s: `channels * 2 * p * 8` bits per frame.
pub fn se_bitrate(order: usize, channels: usize, fps_num: u32, fps_den: u32) -> f64 {
    let bits_per_frame = (channels * 2 * order * 8) as f64;
    bits_per_frame * f64::from(fps_num) / f64::from(fps_den) / 1000.0
}

/// Per-component model bitrates in kbit/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitrateReport {
    pub channels: usize,
    pub frames: usize,
    pub fps: f64,
    pub se_kbps: f64,
    /// Uncompressed 8-bit energy maps; no entropy coding is applied.
    pub sde_kbps: f64,
    pub total_kbps: f64,
}

pub fn model_bitrate_report(stream: &ModelStream) -> BitrateReport {
    let h = &stream.header;
    let channels = h.channels();
    let fps = h.fps();
    if stream.frames.is_empty() {
        return BitrateReport { channels, frames: 0, fps, se_kbps: 0.0, sde_kbps: 0.0, total_kbps: 0.0 };
    }
    let se_kbps = se_bitrate(h.order as usize, channels, h.fps_num, h.fps_den);
    let sde_bytes: usize = stream.frames.iter().flat_map(|f| &f.channels).map(|c| 4 + c.sde.codes.len()).sum();
    let per_frame = sde_bytes as f64 / stream.frames.len() as f64;
    let sde_kbps = per_frame * 8.0 * fps / 1000.0;
    BitrateReport { channels, frames: stream.frames.len(), fps, se_kbps, sde_kbps, total_kbps: se_kbps + sde_kbps }
}
