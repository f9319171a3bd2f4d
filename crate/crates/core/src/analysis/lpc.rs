//! Linear prediction: autocorrelation, Levinson-Durbin recursion, and the
//! reflection-coefficient / log-area-ratio parameterization.
//!
//! Sign conventions: the predictor is `s(k) ~ sum_j a_j s(k-j)`, so the
//! synthesis filter is `1 / (1 - sum_j a_j z^-j)`, and the first reflection
//! coefficient equals the normalized lag-1 autocorrelation. The log-area
//! ratio is `R = ln((1 - r) / (1 + r))`.

use crate::{Error, Result};

/// All-pole spectral envelope of one direction, kept in three equivalent
/// forms.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEnvelope {
    a: Vec<f64>,
    r: Vec<f64>,
    lar: Vec<f64>,
}

impl SpectralEnvelope {
    /// The flat envelope of order `p` (all coefficients zero).
    pub fn identity(p: usize) -> Self {
        Self { a: vec![0.0; p], r: vec![0.0; p], lar: vec![0.0; p] }
    }

    /// Builds the envelope from reflection coefficients, all in (-1, 1).
    pub fn from_reflection(r: Vec<f64>) -> Result<Self> {
        let lar = r.iter().map(|&k| to_lar(k)).collect::<Result<Vec<_>>>()?;
        let a = step_up(&r);
        Ok(Self { a, r, lar })
    }

    /// Builds the envelope from log-area ratios. Always stable.
    pub fn from_lars(lar: Vec<f64>) -> Self {
        let r: Vec<f64> = lar.iter().map(|&v| from_lar(v)).collect();
        let a = step_up(&r);
        Self { a, r, lar }
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    /// Prediction weights `a_1..a_p`.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Reflection (PARCOR) coefficients `r_1..r_p`.
    pub fn reflection(&self) -> &[f64] {
        &self.r
    }

    pub fn lar(&self) -> &[f64] {
        &self.lar
    }

    /// Copy with every reflection coefficient clamped to `[-limit, limit]`.
    pub fn clamp_reflection(&self, limit: f64) -> Self {
        let r: Vec<f64> = self.r.iter().map(|&k| k.clamp(-limit, limit)).collect();
        Self::from_reflection(r).expect("clamped below one")
    }
}

/// Converts reflection coefficients to prediction weights.
pub fn step_up(r: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(r.len());
    for (i, &k) in r.iter().enumerate() {
        let prev = a.clone();
        for j in 0..i {
            a[j] = prev[j] - k * prev[i - 1 - j];
        }
        a.push(k);
    }
    a
}

/// Converts prediction weights back to reflection coefficients. Fails when
/// the predictor is not minimum-phase.
pub fn step_down(a: &[f64]) -> Result<Vec<f64>> {
    let p = a.len();
    let mut cur = a.to_vec();
    let mut r = vec![0.0; p];
    for i in (0..p).rev() {
        let k = cur[i];
        if k.abs() >= 1.0 || !k.is_finite() {
            return Err(Error::UnstableFilter { index: i + 1, value: k });
        }
        r[i] = k;
        let denom = 1.0 - k * k;
        let prev: Vec<f64> = (0..i).map(|j| (cur[j] + k * cur[i - 1 - j]) / denom).collect();
        cur = prev;
    }
    Ok(r)
}

/// Biased autocorrelation `rho(k) = (1/L) sum_i s(i) s(i+k)` for lags `0..=p`.
pub fn autocorrelation(signal: &[f64], p: usize) -> Result<Vec<f64>> {
    let len = signal.len();
    if len <= p {
        return Err(Error::SignalTooShort { len, order: p });
    }
    let scale = 1.0 / len as f64;
    Ok((0..=p).map(|k| signal[..len - k].iter().zip(&signal[k..]).map(|(x, y)| x * y).sum::<f64>() * scale).collect())
}

/// Solves the Toeplitz normal equations for lags `rho(0..=p)`.
pub fn levinson_durbin(rho: &[f64]) -> Result<SpectralEnvelope> {
    let Some(&r0) = rho.first() else {
        return Err(Error::SignalTooShort { len: 0, order: 0 });
    };
    if r0.is_nan() || r0 <= 0.0 {
        return Err(Error::DegenerateSignal(r0));
    }
    let p = rho.len() - 1;
    let mut a = vec![0.0; p];
    let mut r = vec![0.0; p];
    let mut err = r0;
    for i in 0..p {
        let acc = rho[i + 1] - (0..i).map(|j| a[j] * rho[i - j]).sum::<f64>();
        let k = acc / err;
        if k.is_nan() || k.abs() >= 1.0 {
            return Err(Error::UnstableFilter { index: i + 1, value: k });
        }
        let prev = a.clone();
        for j in 0..i {
            a[j] = prev[j] - k * prev[i - 1 - j];
        }
        a[i] = k;
        r[i] = k;
        err *= 1.0 - k * k;
    }
    let lar = r.iter().map(|&k| to_lar(k)).collect::<Result<Vec<_>>>()?;
    Ok(SpectralEnvelope { a, r, lar })
}

/// Log-area ratio `ln((1 - r) / (1 + r))`.
pub fn to_lar(r: f64) -> Result<f64> {
    if r.is_nan() || r.abs() >= 1.0 {
        return Err(Error::ReflectionOutOfRange(r));
    }
    Ok(((1.0 - r) / (1.0 + r)).ln())
}

/// Inverse of [`to_lar`]: `(1 - e^R) / (1 + e^R)`, i.e. `-tanh(R / 2)`.
pub fn from_lar(lar: f64) -> f64 {
    -(lar * 0.5).tanh()
}
