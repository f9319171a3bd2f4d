//! Command implementations behind the `grain-model` binary.

pub mod args;
pub mod hook;
pub mod report;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use grainmodel::analysis::{analyze_frame, extract_noise_layer};
use grainmodel::bitstream::{dequantize_frame, model_bitrate_report, quantize_frame, ModelStream, StreamHeader};
use grainmodel::denoise::denoise_sequence;
use grainmodel::synthesis::{recombine, synthesize_frame, NoiseSeedPolicy};
use grainmodel::video_io::{encode_y4m, parse_y4m, read_raw_planar};
use grainmodel::{ModelConfig, VideoSequence};
use rayon::prelude::*;

use crate::args::{AnalyzeCmd, Cli, Command, DenoiseCmd, RawArgs, ReportCmd, RoundtripCmd, SynthesizeCmd};
use crate::hook::EncoderHook;

/// Runs a parsed command line, inside a dedicated thread pool when
/// `--threads` is set.
pub fn run(cli: Cli) -> Result<()> {
    match cli.threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().context("building thread pool")?;
            pool.install(|| dispatch(cli.command))
        }
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Denoise(c) => cmd_denoise(&c),
        Command::Analyze(c) => cmd_analyze(&c).map(|_| ()),
        Command::Synthesize(c) => cmd_synthesize(&c),
        Command::Roundtrip(c) => cmd_roundtrip(&c).map(|_| ()),
        Command::Report(c) => cmd_report(&c),
    }
}

/// Reads a Y4M file, or raw planar data when `raw` carries a geometry.
pub fn load_video(path: &Path, raw: Option<&RawArgs>) -> Result<VideoSequence> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let seq = match raw.and_then(|r| r.raw_size.map(|s| (s, r))) {
        Some(((w, h), r)) => read_raw_planar(&bytes, w, h, r.raw_layout.into(), r.raw_fps),
        None => parse_y4m(&bytes),
    }
    .with_context(|| format!("parsing {}", path.display()))?;
    Ok(seq)
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so a failed run never leaves a partial output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating output in {}", dir.display()))?;
    tmp.write_all(bytes).with_context(|| format!("writing {}", path.display()))?;
    tmp.as_file().sync_all().ok();
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn cmd_denoise(cmd: &DenoiseCmd) -> Result<()> {
    let cfg = cmd.denoise.config();
    cfg.validate()?;
    let input = load_video(&cmd.input, Some(&cmd.raw))?;
    if input.is_empty() {
        bail!("{} contains no frames", cmd.input.display());
    }
    let out = denoise_sequence(&input, &cfg)?;
    write_atomic(&cmd.output, &encode_y4m(&out))
}

/// Builds the model stream for `input - base`.
pub fn build_model(
    input: &VideoSequence,
    base: &VideoSequence,
    cfg: &ModelConfig,
    embed_seed: Option<u64>,
) -> Result<ModelStream> {
    cfg.validate()?;
    if !input.same_geometry(base) {
        bail!(
            "geometry mismatch: input is {}x{} {:?}, base is {}x{} {:?}",
            input.width(),
            input.height(),
            input.layout(),
            base.width(),
            base.height(),
            base.layout()
        );
    }
    if input.len() != base.len() {
        bail!("frame count mismatch: input has {} frames, base has {}", input.len(), base.len());
    }
    let (fps_num, fps_den) = input.fps();
    let header = StreamHeader {
        width: u32::try_from(input.width()).context("width exceeds 32 bits")?,
        height: u32::try_from(input.height()).context("height exceeds 32 bits")?,
        fps_num,
        fps_den,
        layout: input.layout(),
        beta: u16::try_from(cfg.beta).context("beta exceeds 16 bits")?,
        order: cfg.order as u8,
        seed: embed_seed,
        frame_count: u32::try_from(input.len()).context("too many frames")?,
    };
    if header.channel_grids().is_none() {
        return Err(grainmodel::Error::UnusableGeometry {
            width: input.width(),
            height: input.height(),
            beta: cfg.beta,
        }
        .into());
    }
    let frames = input
        .frames()
        .par_iter()
        .zip(base.frames().par_iter())
        .map(|(i, v)| {
            let noise = extract_noise_layer(i, v)?;
            Ok(quantize_frame(&analyze_frame(&noise, cfg)?, cfg.lar_range))
        })
        .collect::<grainmodel::Result<Vec<_>>>()?;
    Ok(ModelStream { header, frames })
}

pub fn cmd_analyze(cmd: &AnalyzeCmd) -> Result<ModelStream> {
    let cfg = cmd.model.config(cmd.seed.unwrap_or(0));
    cfg.validate()?;
    let input = load_video(&cmd.input, Some(&cmd.raw))?;
    let base = load_video(&cmd.base, Some(&cmd.raw))?;
    let stream = build_model(&input, &base, &cfg, cmd.seed)?;
    write_atomic(&cmd.output, &stream.serialize()?)?;
    let r = model_bitrate_report(&stream);
    println!(
        "frames={} channels={} fps={:.3} se_kbps={:.3} sde_kbps={:.3} total_kbps={:.3}",
        r.frames, r.channels, r.fps, r.se_kbps, r.sde_kbps, r.total_kbps
    );
    Ok(stream)
}

/// Decodes the model and adds synthesized noise to every base frame.
pub fn synthesize_video(
    stream: &ModelStream,
    base: &VideoSequence,
    seed: u64,
    lar_range: f64,
    epsilon: f64,
) -> Result<VideoSequence> {
    let h = &stream.header;
    if base.width() != h.width as usize || base.height() != h.height as usize || base.layout() != h.layout {
        bail!(
            "geometry mismatch: model is {}x{} {:?}, base is {}x{} {:?}",
            h.width,
            h.height,
            h.layout,
            base.width(),
            base.height(),
            base.layout()
        );
    }
    if base.len() != stream.frames.len() {
        bail!("frame count mismatch: model has {} frames, base has {}", stream.frames.len(), base.len());
    }
    let seeds = NoiseSeedPolicy::new(seed);
    let frames = base
        .frames()
        .par_iter()
        .zip(stream.frames.par_iter())
        .enumerate()
        .map(|(f, (frame, q))| {
            let model = dequantize_frame(q, lar_range);
            let noise =
                synthesize_frame(&model, frame.width(), frame.height(), frame.layout(), seeds, f as u64, epsilon)?;
            recombine(frame, &noise)
        })
        .collect::<grainmodel::Result<Vec<_>>>()?;
    Ok(base.with_frames(frames)?)
}

pub fn read_model(path: &Path) -> Result<ModelStream> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    ModelStream::deserialize(&bytes).with_context(|| format!("parsing model stream {}", path.display()))
}

pub fn cmd_synthesize(cmd: &SynthesizeCmd) -> Result<()> {
    let probe =
        ModelConfig { lar_range: cmd.decoder.lar_range, sde_epsilon: cmd.decoder.sde_epsilon, ..Default::default() };
    probe.validate()?;
    let stream = read_model(&cmd.model)?;
    let base = load_video(&cmd.base, None)?;
    let seed = cmd.seed.or(stream.header.seed).unwrap_or(0);
    let out = synthesize_video(&stream, &base, seed, cmd.decoder.lar_range, cmd.decoder.sde_epsilon)?;
    write_atomic(&cmd.output, &encode_y4m(&out))
}

pub fn cmd_roundtrip(cmd: &RoundtripCmd) -> Result<report::RoundtripReport> {
    let dcfg = cmd.denoise.config();
    dcfg.validate()?;
    let seed = cmd.seed.unwrap_or(0);
    let mcfg = cmd.model.config(seed);
    mcfg.validate()?;
    let hook = match &cmd.encoder_cmd {
        Some(t) => {
            if !(cmd.encoder_timeout > 0.0 && cmd.encoder_timeout.is_finite()) {
                bail!("--encoder-timeout must be positive");
            }
            Some(EncoderHook::new(t, Duration::from_secs_f64(cmd.encoder_timeout))?)
        }
        None => None,
    };

    let input = load_video(&cmd.input, Some(&cmd.raw))?;
    if input.is_empty() {
        bail!("{} contains no frames", cmd.input.display());
    }
    let base = denoise_sequence(&input, &dcfg)?;
    let stream = build_model(&input, &base, &mcfg, cmd.seed)?;
    let model_bytes = stream.serialize()?;
    let decoded_stream = ModelStream::deserialize(&model_bytes)?;
    let decoded_base = match &hook {
        Some(h) => h.run(&base)?,
        None => base.clone(),
    };
    let recon = synthesize_video(&decoded_stream, &decoded_base, seed, mcfg.lar_range, mcfg.sde_epsilon)?;

    let rep = report::roundtrip_report(&input, &base, &decoded_base, &recon, &decoded_stream, &mcfg, hook.is_some())?;
    let json = serde_json::to_string_pretty(&rep)? + "\n";

    if let Some(p) = &cmd.model_out {
        write_atomic(p, &model_bytes)?;
    }
    write_atomic(&cmd.output, &encode_y4m(&recon))?;
    match &cmd.report {
        Some(p) => write_atomic(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    Ok(rep)
}

pub fn cmd_report(cmd: &ReportCmd) -> Result<()> {
    let stream = read_model(&cmd.model)?;
    let csv = report::bitrate_csv(&model_bitrate_report(&stream));
    print!("{csv}");
    let Some(dir) = &cmd.out_dir else {
        return Ok(());
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut outputs = vec![(dir.join("bitrate.csv"), csv)];
    if let Some(noise_path) = &cmd.noise {
        let noise = load_video(noise_path, None)?;
        let base = cmd.base.as_deref().map(|p| load_video(p, None)).transpose()?;
        for r in report::spectrum_reports(&stream, &noise, base.as_ref(), cmd.frame, cmd.window, &cmd.decoder)? {
            outputs.push((dir.join(format!("spectrum_{}.csv", r.direction.name())), r.to_csv()));
        }
    }
    for (path, body) in outputs {
        write_atomic(&path, body.as_bytes())?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
