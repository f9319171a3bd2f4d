//! Two-layer video coding with a parametric noise layer.
//!
//! The encoder splits a video into a denoised base layer and a residual
//! noise layer. The noise layer is not waveform-coded; instead each frame is
//! described by a coarse map of block RMS energy plus a horizontal and a
//! vertical all-pole spectral envelope, quantized as 8-bit log-area-ratio
//! codes. The decoder regenerates statistically equivalent noise from a
//! seeded Gaussian source and adds it back to the reconstructed base layer.
//!
//! Module overview:
//!
//! - [`types`]: planes, frames, sequences and configuration
//! - [`video_io`]: Y4M and raw planar I/O
//! - [`denoise`]: motion-compensated temporal denoiser producing the base layer
//! - [`analysis`]: energy maps, normalization and directional LPC
//! - [`bitstream`]: the `PNM1` model stream format and bitrate accounting
//! - [`synthesis`]: seeded noise generation, IIR shaping and energy scaling
//! - [`metrics`]: periodograms, envelope spectra, spectral distance, PSNR

pub mod analysis;
pub mod bitstream;
pub mod denoise;
mod error;
pub mod metrics;
pub mod rng;
pub mod synthesis;
pub mod types;
pub mod video_io;

pub use error::{Error, Result};
pub use types::{chroma_beta, sde_grid_dims, ChromaLayout, DenoiseConfig, Frame, ModelConfig, Plane, VideoSequence};
