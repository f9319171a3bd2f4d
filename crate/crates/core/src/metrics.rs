//! Objective checks: averaged periodograms, all-pole envelope spectra,
//! log-spectral distance, PSNR and energy-map error.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::analysis::{concat_cols, concat_rows, EnergyMap, SpectralEnvelope};
use crate::types::Plane;
use crate::{Error, Result};

/// Default periodogram window length.
pub const DEFAULT_WINDOW: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Horizontal,
    Vertical,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Horizontal => "horizontal",
            Direction::Vertical => "vertical",
        }
    }

    pub fn signal(self, plane: &Plane<f64>) -> Vec<f64> {
        match self {
            Direction::Horizontal => concat_rows(plane),
            Direction::Vertical => concat_cols(plane),
        }
    }
}

/// One-sided power spectrum on bins `k / window_len`, `k = 0..=window_len/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub segments: usize,
}

/// Welch estimate of a 1-D signal: Hann windows, 50 % overlap, each
/// segment scaled by `1 / sum(w^2)` so unit white noise sits at 0 dB.
pub fn welch(signal: &[f64], window_len: usize) -> Result<PowerSpectrum> {
    if window_len < 2 || !window_len.is_power_of_two() {
        return Err(Error::InvalidSpectrum(format!("window length {window_len} is not a power of two >= 2")));
    }
    if signal.len() < window_len {
        return Err(Error::InvalidSpectrum(format!(
            "signal of {} samples is shorter than the {window_len}-sample window",
            signal.len()
        )));
    }
    let window: Vec<f64> =
        (0..window_len).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / window_len as f64).cos()).collect();
    let norm = 1.0 / window.iter().map(|w| w * w).sum::<f64>();
    let fft = FftPlanner::new().plan_fft_forward(window_len);
    let bins = window_len / 2 + 1;
    let mut power = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); window_len];
    let hop = window_len / 2;
    let mut segments = 0;
    let mut start = 0;
    while start + window_len <= signal.len() {
        for ((b, &x), &w) in buf.iter_mut().zip(&signal[start..start + window_len]).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr() * norm;
        }
        segments += 1;
        start += hop;
    }
    let inv = 1.0 / segments as f64;
    power.iter_mut().for_each(|p| *p *= inv);
    let freqs = (0..bins).map(|k| k as f64 / window_len as f64).collect();
    Ok(PowerSpectrum { freqs, power, segments })
}

/// Averaged periodogram of a plane's row- or column-concatenated signal.
pub fn periodogram(plane: &Plane<f64>, direction: Direction, window_len: usize) -> Result<PowerSpectrum> {
    welch(&direction.signal(plane), window_len)
}

/// `1 / |1 - sum_k a_k e^{-j w k}|^2` at `n_points` frequencies evenly
/// spaced over `[0, pi]` (both ends included).
pub fn envelope_spectrum(envelope: &SpectralEnvelope, n_points: usize) -> Vec<f64> {
    let step = if n_points > 1 { PI / (n_points - 1) as f64 } else { 0.0 };
    (0..n_points)
        .map(|i| {
            let w = step * i as f64;
            let (mut re, mut im) = (1.0, 0.0);
            for (k, &a) in envelope.a().iter().enumerate() {
                let phase = w * (k + 1) as f64;
                re -= a * phase.cos();
                im += a * phase.sin();
            }
            1.0 / (re * re + im * im)
        })
        .collect()
}

pub fn to_db(power: &[f64]) -> Vec<f64> {
    power.iter().map(|p| 10.0 * p.log10()).collect()
}

/// RMS of the dB difference between two spectra after removing its mean
/// (gain alignment).
pub fn log_spectral_distance(s1: &[f64], s2: &[f64]) -> Result<f64> {
    if s1.len() != s2.len() || s1.is_empty() {
        return Err(Error::InvalidSpectrum(format!("spectra have lengths {} and {}", s1.len(), s2.len())));
    }
    if let Some((i, v)) = s1.iter().chain(s2).enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidSpectrum(format!("bin {} holds non-positive value {v}", i % s1.len())));
    }
    let d: Vec<f64> = s1.iter().zip(s2).map(|(a, b)| 10.0 * (a / b).log10()).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    Ok((d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt())
}

/// Periodogram of a noise plane next to the envelope's spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub direction: Direction,
    pub freqs: Vec<f64>,
    pub periodogram_db: Vec<f64>,
    /// Envelope in dB, shifted by the mean dB gap to the periodogram.
    pub envelope_db: Vec<f64>,
    pub log_spectral_distance: f64,
}

impl SpectrumReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq,periodogram_db,envelope_db\n");
        for ((f, p), e) in self.freqs.iter().zip(&self.periodogram_db).zip(&self.envelope_db) {
            out.push_str(&format!("{f:.6},{p:.4},{e:.4}\n"));
        }
        out
    }
}

pub fn spectrum_report(
    plane: &Plane<f64>,
    envelope: &SpectralEnvelope,
    direction: Direction,
    window_len: usize,
) -> Result<SpectrumReport> {
    let spec = periodogram(plane, direction, window_len)?;
    let env = envelope_spectrum(envelope, spec.power.len());
    let lsd = log_spectral_distance(&spec.power, &env)?;
    let periodogram_db = to_db(&spec.power);
    let mut envelope_db = to_db(&env);
    let gap = periodogram_db.iter().zip(&envelope_db).map(|(p, e)| p - e).sum::<f64>() / env.len() as f64;
    envelope_db.iter_mut().for_each(|e| *e += gap);
    Ok(SpectrumReport { direction, freqs: spec.freqs, periodogram_db, envelope_db, log_spectral_distance: lsd })
}

/// PSNR in dB for 8-bit planes; `f64::INFINITY` when identical.
pub fn psnr(a: &Plane<u8>, b: &Plane<u8>) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::GeometryMismatch(format!("planes {:?} and {:?}", a.dims(), b.dims())));
    }
    let sse: f64 = a.samples().iter().zip(b.samples()).map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2)).sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / a.samples().len() as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

/// Cell-wise error of `measured` against `reference`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRmsError {
    pub max_abs: f64,
    /// Relative to the reference cell; a non-zero error on a zero reference
    /// cell counts as infinite.
    pub max_rel: f64,
    pub mean_rel: f64,
}

pub fn block_rms_error(measured: &EnergyMap, reference: &EnergyMap) -> Result<BlockRmsError> {
    if measured.dims() != reference.dims() {
        return Err(Error::GeometryMismatch(format!("energy maps {:?} and {:?}", measured.dims(), reference.dims())));
    }
    let (mut max_abs, mut max_rel, mut sum_rel) = (0.0f64, 0.0f64, 0.0);
    for (&m, &r) in measured.values().iter().zip(reference.values()) {
        let abs = (m - r).abs();
        let rel = if abs == 0.0 {
            0.0
        } else if r > 0.0 {
            abs / r
        } else {
            f64::INFINITY
        };
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
        sum_rel += rel;
    }
    Ok(BlockRmsError { max_abs, max_rel, mean_rel: sum_rel / measured.values().len() as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{gaussian_plane, iir_filter_1d};

    #[test]
    fn white_noise_is_flat_at_0db() {
        let p = gaussian_plane(512, 512, 1);
        let spec = periodogram(&p, Direction::Horizontal, 256).unwrap();
        assert!(spec.segments >= 512);
        let db = to_db(&spec.power);
        let mean = db.iter().sum::<f64>() / db.len() as f64;
        assert!(mean.abs() <= 0.5, "mean {mean}");
        assert!(db.iter().all(|d| d.abs() <= 1.5), "{db:?}");
    }

    #[test]
    fn cosine_has_one_dominant_bin() {
        let x: Vec<f64> = (0..4096).map(|n| (PI / 4.0 * n as f64).cos()).collect();
        let spec = welch(&x, 256).unwrap();
        let (peak, _) = spec.power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(spec.freqs[peak], 0.125);
        let second =
            spec.power.iter().enumerate().filter(|(i, _)| i.abs_diff(peak) > 1).map(|(_, p)| *p).fold(0.0, f64::max);
        assert!(spec.power[peak] > 1e3 * second);
    }

    #[test]
    fn ar1_spectrum_slope() {
        let white = gaussian_plane(1024, 512, 2);
        let y = iir_filter_1d(white.samples(), &[0.9]);
        let spec = welch(&y, 256).unwrap();
        let db = to_db(&spec.power);
        let drop = db[0] - db[db.len() - 1];
        assert!((drop - 10.0 * 361f64.log10()).abs() < 1.5, "drop {drop}");
        // monotone apart from estimation noise
        for w in db.windows(8).step_by(8) {
            assert!(w[0] + 0.5 >= w[7]);
        }
    }

    #[test]
    fn parseval_mean_matches_variance() {
        for a in [0.0, 0.5] {
            let white = gaussian_plane(512, 512, 3);
            let y = iir_filter_1d(white.samples(), &[a]);
            let var = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
            let spec = welch(&y, 256).unwrap();
            let mean = spec.power.iter().sum::<f64>() / spec.power.len() as f64;
            assert!((mean / var - 1.0).abs() < 0.02, "a={a}: {mean} vs {var}");
        }
    }

    #[test]
    fn bad_windows() {
        assert!(welch(&[0.0; 100], 48).is_err());
        assert!(welch(&[0.0; 100], 128).is_err());
    }

    #[test]
    fn envelope_spectrum_values() {
        let flat = envelope_spectrum(&SpectralEnvelope::identity(10), 33);
        assert!(flat.iter().all(|&v| v == 1.0));
        let env = SpectralEnvelope::from_reflection(vec![0.9]).unwrap();
        let s = envelope_spectrum(&env, 129);
        assert!((s[0] - 100.0).abs() < 1e-9);
        assert!((s[128] - 1.0 / 3.61).abs() < 1e-12);
    }

    #[test]
    fn lsd_properties() {
        let a = vec![1.0, 2.0, 3.0];
        assert_eq!(log_spectral_distance(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v * 7.0).collect();
        assert!(log_spectral_distance(&a, &b).unwrap() < 1e-12);
        assert!(log_spectral_distance(&a, &[1.0, 0.0, 1.0]).is_err());
        assert!(log_spectral_distance(&a, &[1.0]).is_err());
    }

    #[test]
    fn lsd_flat_vs_ar1_regression() {
        // Direct evaluation of the definition on 129 bins.
        let n = 129;
        let ar: Vec<f64> = (0..n)
            .map(|i| {
                let w = PI * i as f64 / (n - 1) as f64;
                1.0 / (1.0 - 1.8 * w.cos() + 0.81)
            })
            .collect();
        let db: Vec<f64> = ar.iter().map(|v| -10.0 * v.log10()).collect();
        let mean = db.iter().sum::<f64>() / n as f64;
        let want = (db.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let env = envelope_spectrum(&SpectralEnvelope::from_reflection(vec![0.9]).unwrap(), n);
        let got = log_spectral_distance(&vec![1.0; n], &env).unwrap();
        assert!((got - want).abs() < 1e-9);
        assert!(got > 5.0);
    }

    #[test]
    fn psnr_values() {
        let a = Plane::filled(8, 8, 100u8);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = Plane::filled(8, 8, 101u8);
        assert!((psnr(&a, &b).unwrap() - 48.1308).abs() < 1e-3);
        assert!(psnr(&a, &Plane::filled(4, 8, 0u8)).is_err());
    }

    #[test]
    fn block_error() {
        let m = EnergyMap::new(2, 2, 1, vec![1.0, 0.0]).unwrap();
        let e = block_rms_error(&m, &m).unwrap();
        assert_eq!((e.max_abs, e.max_rel, e.mean_rel), (0.0, 0.0, 0.0));
        let r = EnergyMap::new(2, 2, 1, vec![2.0, 0.0]).unwrap();
        let e = block_rms_error(&m, &r).unwrap();
        assert_eq!((e.max_abs, e.max_rel, e.mean_rel), (1.0, 0.5, 0.25));
    }
}
