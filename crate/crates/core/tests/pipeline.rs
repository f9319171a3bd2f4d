use grainmodel::analysis::{analyze_frame, compute_sde, extract_noise_layer};
use grainmodel::bitstream::{dequantize_frame, quantize_frame};
use grainmodel::denoise::{denoise_sequence, temporal_filter, MotionField};
use grainmodel::synthesis::{recombine, synthesize_frame, NoiseSeedPolicy};
use grainmodel::types::Plane;
use grainmodel::{ChromaLayout, DenoiseConfig, Frame, ModelConfig, VideoSequence};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Static textured scene with i.i.d. Gaussian noise per frame.
fn static_scene(
    w: usize,
    h: usize,
    frames: usize,
    sigma: f64,
    layout: ChromaLayout,
    seed: u64,
) -> (Vec<Plane<u8>>, VideoSequence) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clean: Vec<Plane<u8>> = layout
        .plane_dims(w, h)
        .into_iter()
        .map(|(pw, ph)| Plane::from_fn(pw, ph, |_, _| rng.random_range(50..206)))
        .collect();
    let frames = (0..frames)
        .map(|_| {
            let planes = clean
                .iter()
                .map(|c| {
                    let mut p = c.clone();
                    for s in p.samples_mut() {
                        let n: f64 = rng.sample(StandardNormal);
                        *s = (f64::from(*s) + sigma * n).round().clamp(0.0, 255.0) as u8;
                    }
                    p
                })
                .collect();
            Frame::new(planes, layout).unwrap()
        })
        .collect();
    (clean, VideoSequence::from_frames(frames, 25, 1).unwrap())
}

fn mse(a: &Plane<u8>, b: &Plane<u8>) -> f64 {
    let s: f64 = a.samples().iter().zip(b.samples()).map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2)).sum();
    s / a.samples().len() as f64
}

#[test]
fn denoising_reduces_noise_energy() {
    let (clean, seq) = static_scene(96, 64, 5, 6.0, ChromaLayout::Yuv420, 1);
    let out = denoise_sequence(&seq, &DenoiseConfig::default()).unwrap();
    for (f_in, f_out) in seq.frames().iter().zip(out.frames()) {
        for (c, clean_plane) in clean.iter().enumerate() {
            let before = mse(&f_in.planes()[c], clean_plane);
            let after = mse(&f_out.planes()[c], clean_plane);
            assert!(after < before, "channel {c}: {after} >= {before}");
        }
    }
}

#[test]
fn denoise_output_is_thread_count_independent() {
    let (_, seq) = static_scene(80, 48, 6, 5.0, ChromaLayout::Yuv420, 2);
    let cfg = DenoiseConfig { k_frames: 2, ..DenoiseConfig::default() };
    let run = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| denoise_sequence(&seq, &cfg).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn synthesis_is_thread_count_independent() {
    let (_, seq) = static_scene(90, 60, 1, 5.0, ChromaLayout::Yuv444, 3);
    let base = Frame::filled(90, 60, ChromaLayout::Yuv444, 128);
    let noise = extract_noise_layer(&seq.frames()[0], &base).unwrap();
    let cfg = ModelConfig::default();
    let model = dequantize_frame(&quantize_frame(&analyze_frame(&noise, &cfg).unwrap(), cfg.lar_range), cfg.lar_range);
    let run = |n| {
        rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(|| {
            synthesize_frame(&model, 90, 60, ChromaLayout::Yuv444, NoiseSeedPolicy::new(4), 2, 1e-6).unwrap()
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn chroma_closed_loop_preserves_block_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let layout = ChromaLayout::Yuv420;
    let base = Frame::filled(120, 90, layout, 128);
    let planes = layout
        .plane_dims(120, 90)
        .into_iter()
        .map(|(w, h)| {
            Plane::from_fn(w, h, |x, _| {
                let n: f64 = rng.sample(StandardNormal);
                (128.0 + (2.0 + x as f64 / 20.0) * n).round() as u8
            })
        })
        .collect();
    let noisy = Frame::new(planes, layout).unwrap();
    let noise = extract_noise_layer(&noisy, &base).unwrap();
    let cfg = ModelConfig::default();
    let q = quantize_frame(&analyze_frame(&noise, &cfg).unwrap(), cfg.lar_range);
    let model = dequantize_frame(&q, cfg.lar_range);
    let synth = synthesize_frame(&model, 120, 90, layout, NoiseSeedPolicy::new(1), 0, cfg.sde_epsilon).unwrap();
    assert_eq!(model.channels.len(), 3);
    for (c, ch) in model.channels.iter().enumerate() {
        let beta = ch.sde.beta();
        assert_eq!(beta, if c == 0 { 30 } else { 15 });
        let resynth = compute_sde(&synth.planes()[c], beta).unwrap();
        for (m, d) in resynth.values().iter().zip(ch.sde.values()) {
            assert!((m - d).abs() <= 1e-9 * d, "channel {c}: {m} vs {d}");
        }
        let original = compute_sde(&noise.planes()[c], beta).unwrap();
        let s = f64::from(q.channels[c].sde.scale);
        for (o, d) in original.values().iter().zip(ch.sde.values()) {
            assert!((o - d).abs() <= 0.5 * s / 255.0 + s * 1e-6, "channel {c}: {o} vs {d}");
        }
    }
    let recon = recombine(&base, &synth).unwrap();
    assert_eq!(recon.layout(), layout);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn temporal_filter_is_a_convex_combination(
        seed in any::<u64>(),
        n_pred in 1usize..4,
        lambda in 0.5f64..50.0,
        w in 4usize..40,
        h in 4usize..40,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut plane = || Plane::from_fn(w, h, |_, _| rng.random::<u8>());
        let current = plane();
        let cfg = DenoiseConfig { lambda, block: 8, ..DenoiseConfig::default() };
        let preds: Vec<(Plane<u8>, MotionField)> = (0..n_pred)
            .map(|_| {
                let p = plane();
                let f = MotionField::zero(w, h, 8).with_sads(&current, &p);
                (p, f)
            })
            .collect();
        let out = temporal_filter(&current, &preds, &cfg).unwrap();
        for y in 0..h {
            for x in 0..w {
                let vals: Vec<u8> = std::iter::once(current.get(x, y)).chain(preds.iter().map(|(p, _)| p.get(x, y))).collect();
                let (lo, hi) = (*vals.iter().min().unwrap(), *vals.iter().max().unwrap());
                let v = out.get(x, y);
                prop_assert!(lo <= v && v <= hi, "{v} outside [{lo}, {hi}]");
            }
        }
    }
}
