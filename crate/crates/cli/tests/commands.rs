use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use grainmodel::bitstream::ModelStream;
use grainmodel::types::Plane;
use grainmodel::video_io::{encode_y4m, parse_y4m};
use grainmodel::{ChromaLayout, Frame, VideoSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grain-model"))
        .args(args)
        .env_remove("GRAIN_MODEL_THREADS")
        .output()
        .expect("spawn grain-model")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Noisy 4:2:0 sequence over a smooth gradient.
fn noisy_video(w: usize, h: usize, frames: usize, seed: u64) -> VideoSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = (0..frames)
        .map(|_| {
            let planes = ChromaLayout::Yuv420
                .plane_dims(w, h)
                .into_iter()
                .map(|(pw, ph)| {
                    Plane::from_fn(pw, ph, |x, y| {
                        let n: f64 = rng.sample(StandardNormal);
                        (60.0 + (x + y) as f64 * 0.5 + 4.0 * n).round().clamp(0.0, 255.0) as u8
                    })
                })
                .collect();
            Frame::new(planes, ChromaLayout::Yuv420).unwrap()
        })
        .collect();
    VideoSequence::from_frames(frames, 30, 1).unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn video(&self, name: &str, seq: &VideoSequence) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, encode_y4m(seq)).unwrap();
        p
    }
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\nstderr: {}", o.status, stderr(o));
}

#[test]
fn denoise_tiny_y4m() {
    let ws = Workspace::new();
    let input = ws.video("in.y4m", &noisy_video(48, 32, 3, 1));
    let out = ws.path("out.y4m");
    let o = bin(&["denoise", "--in", s(&input), "--out", s(&out), "--k-frames", "1"]);
    assert_ok(&o);
    let seq = parse_y4m(&fs::read(&out).unwrap()).unwrap();
    assert_eq!((seq.width(), seq.height(), seq.len()), (48, 32, 3));
}

#[test]
fn denoise_missing_input_names_path() {
    let ws = Workspace::new();
    let missing = ws.path("does-not-exist.y4m");
    let o = bin(&["denoise", "--in", s(&missing), "--out", s(&ws.path("o.y4m"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("does-not-exist.y4m"), "{}", stderr(&o));
}

#[test]
fn denoise_rejects_zero_k_before_io() {
    let ws = Workspace::new();
    // The input does not exist: the config error must come first.
    let o = bin(&["denoise", "--in", s(&ws.path("nope.y4m")), "--out", s(&ws.path("o.y4m")), "--k-frames", "0"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("k_frames"), "{err}");
    assert!(!err.contains("nope.y4m"), "{err}");
    assert!(!ws.path("o.y4m").exists());
}

#[test]
fn analyze_header_echoes_geometry() {
    let ws = Workspace::new();
    let input = ws.video("in.y4m", &noisy_video(64, 48, 2, 2));
    let base = ws.video(
        "base.y4m",
        &VideoSequence::from_frames(vec![Frame::filled(64, 48, ChromaLayout::Yuv420, 80); 2], 30, 1).unwrap(),
    );
    let model = ws.path("m.pnm1");
    let o =
        bin(&["analyze", "--in", s(&input), "--base", s(&base), "--out", s(&model), "--beta", "16", "--seed", "99"]);
    assert_ok(&o);
    assert!(stdout(&o).contains("se_kbps=14.400"), "{}", stdout(&o));
    let stream = ModelStream::deserialize(&fs::read(&model).unwrap()).unwrap();
    let h = stream.header;
    assert_eq!((h.width, h.height, h.fps_num, h.fps_den, h.layout), (64, 48, 30, 1, ChromaLayout::Yuv420));
    assert_eq!((h.beta, h.order, h.seed, h.frame_count), (16, 10, Some(99), 2));
}

#[test]
fn analyze_rejects_frame_count_mismatch() {
    let ws = Workspace::new();
    let input = ws.video("in.y4m", &noisy_video(64, 48, 2, 3));
    let base = ws.video("base.y4m", &noisy_video(64, 48, 3, 4));
    let out = ws.path("m.pnm1");
    let o = bin(&["analyze", "--in", s(&input), "--base", s(&base), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("frame count"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn analyze_small_frame_is_geometry_error() {
    let ws = Workspace::new();
    let v = VideoSequence::from_frames(vec![Frame::filled(16, 16, ChromaLayout::Mono, 10)], 30, 1).unwrap();
    let input = ws.video("in.y4m", &v);
    let o = bin(&["analyze", "--in", s(&input), "--base", s(&input), "--out", s(&ws.path("m.pnm1"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("geometry"), "{}", stderr(&o));
}

fn zero_model(ws: &Workspace, base: &Path) -> PathBuf {
    let model = ws.path("zero.pnm1");
    assert_ok(&bin(&["analyze", "--in", s(base), "--base", s(base), "--out", s(&model), "--beta", "16"]));
    model
}

#[test]
fn zero_energy_model_leaves_base_unchanged() {
    let ws = Workspace::new();
    let base = ws.video("base.y4m", &noisy_video(64, 48, 2, 5));
    let model = zero_model(&ws, &base);
    let out = ws.path("out.y4m");
    assert_ok(&bin(&["synthesize", "--model", s(&model), "--base", s(&base), "--out", s(&out), "--seed", "3"]));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&base).unwrap());
}

#[test]
fn synthesize_is_reproducible() {
    let ws = Workspace::new();
    let input = ws.video("in.y4m", &noisy_video(64, 48, 2, 6));
    let base = ws.video(
        "base.y4m",
        &VideoSequence::from_frames(vec![Frame::filled(64, 48, ChromaLayout::Yuv420, 100); 2], 30, 1).unwrap(),
    );
    let model = ws.path("m.pnm1");
    assert_ok(&bin(&[
        "analyze",
        "--in",
        s(&input),
        "--base",
        s(&base),
        "--out",
        s(&model),
        "--beta",
        "16",
        "--seed",
        "5",
    ]));
    let run = |name: &str, extra: &[&str]| {
        let out = ws.path(name);
        let mut args = vec!["synthesize", "--model", s(&model), "--base", s(&base), "--out", s(&out)];
        args.extend_from_slice(extra);
        assert_ok(&bin(&args));
        fs::read(out).unwrap()
    };
    let a = run("a.y4m", &[]);
    let b = run("b.y4m", &["--seed", "5"]);
    let c = run("c.y4m", &["--seed", "6"]);
    assert_eq!(a, b, "header seed and explicit seed agree");
    assert_ne!(a, c);
    assert_ne!(a, fs::read(&base).unwrap());
}

#[test]
fn synthesize_rejects_corrupt_magic() {
    let ws = Workspace::new();
    let base = ws.video("base.y4m", &noisy_video(64, 48, 1, 7));
    let model = zero_model(&ws, &base);
    let mut bytes = fs::read(&model).unwrap();
    bytes[0] = b'X';
    fs::write(&model, bytes).unwrap();
    let o = bin(&["synthesize", "--model", s(&model), "--base", s(&base), "--out", s(&ws.path("o.y4m"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("magic"), "{}", stderr(&o));
}

#[test]
fn synthesize_rejects_geometry_mismatch() {
    let ws = Workspace::new();
    let base = ws.video("base.y4m", &noisy_video(64, 48, 1, 8));
    let model = zero_model(&ws, &base);
    let other = ws.video("other.y4m", &noisy_video(64, 64, 1, 8));
    let o = bin(&["synthesize", "--model", s(&model), "--base", s(&other), "--out", s(&ws.path("o.y4m"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("geometry mismatch"), "{}", stderr(&o));
}

fn roundtrip_json(ws: &Workspace, input: &Path, extra: &[&str]) -> (Output, Option<serde_json::Value>) {
    let report = ws.path("report.json");
    let out = ws.path("rt.y4m");
    let mut args = vec![
        "roundtrip",
        "--in",
        s(input),
        "--out",
        s(&out),
        "--report",
        s(&report),
        "--beta",
        "16",
        "--k-frames",
        "1",
    ];
    args.extend_from_slice(extra);
    let o = bin(&args);
    let json = fs::read_to_string(&report).ok().map(|t| serde_json::from_str(&t).unwrap());
    (o, json)
}

#[test]
fn roundtrip_passthrough_sde_within_quantizer_bound() {
    let ws = Workspace::new();
    let input = ws.video("in.y4m", &noisy_video(96, 64, 3, 9));
    let (o, json) = roundtrip_json(&ws, &input, &["--seed", "1"]);
    assert_ok(&o);
    let j = json.unwrap();
    assert_eq!(j["schema"], "grain-model.roundtrip/1");
    assert_eq!(j["sde_error"]["within_bound"], true, "{j:#}");
    assert_eq!(j["base_psnr_db"], "inf");
    assert_eq!(j["encoder_hook"], false);
    let se = j["bitrate_kbps"]["se"].as_f64().unwrap();
    assert!((se - 14.4).abs() < 1e-9, "{se}");
    assert_eq!(j["spectra"].as_array().unwrap().len(), 2);
    let recon = parse_y4m(&fs::read(ws.path("rt.y4m")).unwrap()).unwrap();
    assert_eq!(recon.len(), 3);
}

#[test]
fn roundtrip_with_copy_hook() {
    let ws = Workspace::new();
    let input = ws.video("in.y4m", &noisy_video(64, 48, 2, 10));
    let (o, json) = roundtrip_json(&ws, &input, &["--encoder-cmd", "cp {in} {out}"]);
    assert_ok(&o);
    let j = json.unwrap();
    assert_eq!(j["encoder_hook"], true);
    assert_eq!(j["base_psnr_db"], "inf");
}

#[test]
fn roundtrip_rejects_template_without_out() {
    let ws = Workspace::new();
    let input = ws.video("in.y4m", &noisy_video(64, 48, 1, 11));
    let (o, json) = roundtrip_json(&ws, &input, &["--encoder-cmd", "cp {in} /tmp/x.y4m"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("{out}"), "{}", stderr(&o));
    assert!(json.is_none());
}

#[test]
fn roundtrip_aborts_on_failing_hook() {
    let ws = Workspace::new();
    let input = ws.video("in.y4m", &noisy_video(64, 48, 1, 12));
    let (o, json) = roundtrip_json(&ws, &input, &["--encoder-cmd", "echo codec-exploded >&2; false {in} {out}"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("codec-exploded"), "{}", stderr(&o));
    assert!(json.is_none());
    assert!(!ws.path("rt.y4m").exists());
}

/// Builds a mono model at the given frame rate through the CLI.
fn mono_model(ws: &Workspace, fps: u32) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(fps));
    let frame = |rng: &mut ChaCha8Rng| {
        Frame::new(vec![Plane::from_fn(64, 64, |_, _| rng.random_range(100..156))], ChromaLayout::Mono).unwrap()
    };
    let input =
        ws.video("mono.y4m", &VideoSequence::from_frames(vec![frame(&mut rng), frame(&mut rng)], fps, 1).unwrap());
    let base = ws.video(
        "flat.y4m",
        &VideoSequence::from_frames(vec![Frame::filled(64, 64, ChromaLayout::Mono, 128); 2], fps, 1).unwrap(),
    );
    let model = ws.path("mono.pnm1");
    assert_ok(&bin(&["analyze", "--in", s(&input), "--base", s(&base), "--out", s(&model)]));
    model
}

fn se_column(csv: &str) -> f64 {
    csv.lines().find_map(|l| l.strip_prefix("se,")).unwrap().parse().unwrap()
}

#[test]
fn report_se_column_matches_reference_rates() {
    for (fps, want) in [(30, 4.8), (60, 9.6)] {
        let ws = Workspace::new();
        let model = mono_model(&ws, fps);
        let o = bin(&["report", "--model", s(&model)]);
        assert_ok(&o);
        assert_eq!(se_column(&stdout(&o)), want);
    }
}

#[test]
fn report_without_noise_writes_bitrate_only() {
    let ws = Workspace::new();
    let model = mono_model(&ws, 30);
    let out_dir = ws.path("reports");
    assert_ok(&bin(&["report", "--model", s(&model), "--out-dir", s(&out_dir)]));
    let mut names: Vec<_> = fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["bitrate.csv"]);
}

#[test]
fn report_with_noise_writes_spectra() {
    let ws = Workspace::new();
    let model = mono_model(&ws, 30);
    let out_dir = ws.path("reports");
    let noise = ws.path("mono.y4m");
    let base = ws.path("flat.y4m");
    assert_ok(&bin(&[
        "report",
        "--model",
        s(&model),
        "--noise",
        s(&noise),
        "--base",
        s(&base),
        "--out-dir",
        s(&out_dir),
        "--window",
        "64",
    ]));
    for dir in ["horizontal", "vertical"] {
        let csv = fs::read_to_string(out_dir.join(format!("spectrum_{dir}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("freq,periodogram_db,envelope_db"));
        assert_eq!(lines.count(), 33);
    }
}

#[test]
fn threads_flag_does_not_change_output() {
    let ws = Workspace::new();
    let input = ws.video("in.y4m", &noisy_video(64, 48, 4, 13));
    let run = |threads: &str, name: &str| {
        let out = ws.path(name);
        assert_ok(&bin(&["--threads", threads, "denoise", "--in", s(&input), "--out", s(&out)]));
        fs::read(out).unwrap()
    };
    assert_eq!(run("1", "a.y4m"), run("3", "b.y4m"));
}

#[test]
fn raw_planar_input() {
    let ws = Workspace::new();
    let seq = noisy_video(32, 32, 2, 14);
    let raw: Vec<u8> = seq.frames().iter().flat_map(|f| f.planes().iter().flat_map(|p| p.samples().to_vec())).collect();
    let input = ws.path("in.yuv");
    fs::write(&input, raw).unwrap();
    let out = ws.path("out.y4m");
    assert_ok(&bin(&["denoise", "--in", s(&input), "--out", s(&out), "--raw-size", "32x32", "--raw-fps", "25:1"]));
    let back = parse_y4m(&fs::read(&out).unwrap()).unwrap();
    assert_eq!((back.width(), back.len(), back.fps()), (32, 2, (25, 1)));
}
