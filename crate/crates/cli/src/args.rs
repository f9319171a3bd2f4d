use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grainmodel::{ChromaLayout, DenoiseConfig, ModelConfig};

#[derive(Debug, Parser)]
#[command(name = "grain-model", version, about = "Parametric noise-layer video coding")]
pub struct Cli {
    /// Worker threads for frame-level parallelism (output does not depend on it).
    #[arg(long, global = true, env = "GRAIN_MODEL_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Motion-compensated temporal denoising (produces the base layer).
    Denoise(DenoiseCmd),
    /// Model the noise layer `input - base` and write a .pnm1 stream.
    Analyze(AnalyzeCmd),
    /// Synthesize noise from a model and add it to a base layer.
    Synthesize(SynthesizeCmd),
    /// Full pipeline: denoise, analyze, base codec, synthesize, recombine.
    Roundtrip(RoundtripCmd),
    /// Bitrate table and optional spectrum CSVs for a model stream.
    Report(ReportCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Mono,
    #[value(name = "420")]
    Yuv420,
    #[value(name = "444")]
    Yuv444,
}

impl From<LayoutArg> for ChromaLayout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Mono => ChromaLayout::Mono,
            LayoutArg::Yuv420 => ChromaLayout::Yuv420,
            LayoutArg::Yuv444 => ChromaLayout::Yuv444,
        }
    }
}

/// Headerless planar input. When `--raw-size` is given every video input of
/// the command is read as raw planar 8-bit data.
#[derive(Debug, Clone, Args)]
pub struct RawArgs {
    /// Geometry of raw planar input, e.g. 1920x1080.
    #[arg(long, value_name = "WxH", value_parser = parse_size)]
    pub raw_size: Option<(usize, usize)>,
    #[arg(long, value_enum, default_value = "420", requires = "raw_size")]
    pub raw_layout: LayoutArg,
    /// Frame rate of raw input as NUM:DEN.
    #[arg(long, value_name = "NUM:DEN", value_parser = parse_fps, default_value = "30:1", requires = "raw_size")]
    pub raw_fps: (u32, u32),
}

#[derive(Debug, Clone, Args)]
pub struct DenoiseArgs {
    /// Neighbors used on each side of the current frame (K).
    #[arg(long, default_value_t = 3)]
    pub k_frames: usize,
    /// Block-matching block size in pixels.
    #[arg(long, default_value_t = 16)]
    pub block: usize,
    #[arg(long, default_value_t = 8)]
    pub search_radius: usize,
    /// Similarity decay in per-pixel SAD units.
    #[arg(long, default_value_t = 4.0)]
    pub lambda: f64,
}

impl DenoiseArgs {
    pub fn config(&self) -> DenoiseConfig {
        DenoiseConfig {
            k_frames: self.k_frames,
            block: self.block,
            search_radius: self.search_radius,
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// SDE block size in luma pixels.
    #[arg(long, default_value_t = 30)]
    pub beta: usize,
    /// Prediction order of each spectral envelope.
    #[arg(long, default_value_t = 10)]
    pub order: usize,
    /// Half-range of the 8-bit LAR quantizer (must match at the decoder).
    #[arg(long, default_value_t = 8.0)]
    pub lar_range: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub sde_epsilon: f64,
}

impl ModelArgs {
    pub fn config(&self, seed: u64) -> ModelConfig {
        ModelConfig {
            beta: self.beta,
            order: self.order,
            master_seed: seed,
            lar_range: self.lar_range,
            sde_epsilon: self.sde_epsilon,
        }
    }
}

/// Decoder-side model parameters that are not carried in the stream.
#[derive(Debug, Clone, Args)]
pub struct DecoderArgs {
    #[arg(long, default_value_t = 8.0)]
    pub lar_range: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub sde_epsilon: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DenoiseCmd {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long = "out", value_name = "PATH")]
    pub output: PathBuf,
    #[command(flatten)]
    pub denoise: DenoiseArgs,
    #[command(flatten)]
    pub raw: RawArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeCmd {
    /// Noisy input video.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Denoised base layer.
    #[arg(long, value_name = "PATH")]
    pub base: PathBuf,
    /// Output model stream (.pnm1).
    #[arg(long = "out", value_name = "PATH")]
    pub output: PathBuf,
    /// Master seed to embed in the stream header.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub raw: RawArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthesizeCmd {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Reconstructed base layer (Y4M).
    #[arg(long, value_name = "PATH")]
    pub base: PathBuf,
    #[arg(long = "out", value_name = "PATH")]
    pub output: PathBuf,
    /// Master seed; defaults to the seed in the stream header, else 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub decoder: DecoderArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RoundtripCmd {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Reconstructed output video (Y4M).
    #[arg(long = "out", value_name = "PATH")]
    pub output: PathBuf,
    /// External base-layer codec, e.g. "my-enc {in} tmp.bin && my-dec tmp.bin {out}".
    #[arg(long, value_name = "TEMPLATE")]
    pub encoder_cmd: Option<String>,
    /// Seconds before the encoder hook is killed.
    #[arg(long, default_value_t = 3600.0)]
    pub encoder_timeout: f64,
    /// JSON report path; printed to stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Also keep the model stream.
    #[arg(long, value_name = "PATH")]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub denoise: DenoiseArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub raw: RawArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportCmd {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Noise video (Y4M). Samples are read as `value - 128`, or as
    /// `value - base` when --base is also given.
    #[arg(long, value_name = "PATH", requires = "out_dir")]
    pub noise: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires = "noise")]
    pub base: Option<PathBuf>,
    /// Directory for bitrate.csv and the spectrum CSVs.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Frame whose luma spectra are reported.
    #[arg(long, default_value_t = 0)]
    pub frame: usize,
    /// Periodogram window length (power of two).
    #[arg(long, default_value_t = 256)]
    pub window: usize,
    #[command(flatten)]
    pub decoder: DecoderArgs,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    match (w.parse::<usize>(), h.parse::<usize>()) {
        (Ok(w), Ok(h)) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(format!("expected positive WxH, got {s:?}")),
    }
}

fn parse_fps(s: &str) -> Result<(u32, u32), String> {
    let (n, d) = s.split_once(':').unwrap_or((s, "1"));
    match (n.parse::<u32>(), d.parse::<u32>()) {
        (Ok(n), Ok(d)) if n > 0 && d > 0 => Ok((n, d)),
        _ => Err(format!("expected NUM:DEN with positive terms, got {s:?}")),
    }
}
