//! Deterministic noise source.
//!
//! The generator and its seeding are part of the decoder contract: the same
//! model bytes and master seed must reproduce the same noise on every
//! platform. All constants below are normative.
//!
//! * Seed finalizer: the SplitMix64 output mix
//!   `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`.
//! * Stream seed for `(master, frame, channel)`:
//!   `mix(mix(mix(master + G) ^ (frame + G)) ^ (channel + G))` with
//!   `G = 0x9E3779B97F4A7C15` and wrapping arithmetic.
//! * Generator: xorshift64* with shifts `(12, 25, 27)` and multiplier
//!   `0x2545F4914F6CDD1D`; initial state is `mix(stream_seed + G)`, replaced
//!   by `G` if zero.
//! * Uniforms: `((next >> 11) + 1) * 2^-53`, in `(0, 1]`.
//! * Normals: Box-Muller pairs `sqrt(-2 ln u1) * cos(2 pi u2)` then
//!   `sqrt(-2 ln u1) * sin(2 pi u2)`, emitted in that order.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the noise stream for one channel of one frame.
pub fn stream_seed(master_seed: u64, frame_index: u64, channel_index: u64) -> u64 {
    let s = splitmix64_mix(master_seed.wrapping_add(GOLDEN_GAMMA));
    let s = splitmix64_mix(s ^ frame_index.wrapping_add(GOLDEN_GAMMA));
    splitmix64_mix(s ^ channel_index.wrapping_add(GOLDEN_GAMMA))
}

/// xorshift64* generator.
#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let state = splitmix64_mix(seed.wrapping_add(GOLDEN_GAMMA));
        Self { state: if state == 0 { GOLDEN_GAMMA } else { state } }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform sample in `(0, 1]`.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Standard normal samples from Box-Muller on [`XorShift64Star`].
#[derive(Debug, Clone)]
pub struct GaussianSource {
    rng: XorShift64Star,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        Self { rng: XorShift64Star::new(seed), spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = self.rng.next_open01();
        let u2 = self.rng.next_open01();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(radius * s);
        radius * c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // Outputs of the reference SplitMix64 generator seeded with 0:
        // next() = mix(state += G).
        assert_eq!(splitmix64_mix(GOLDEN_GAMMA), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64_mix(GOLDEN_GAMMA.wrapping_mul(2)), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn stream_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for m in 0..4 {
            for f in 0..50 {
                for c in 0..3 {
                    assert!(seen.insert(stream_seed(m, f, c)));
                }
            }
        }
    }

    #[test]
    fn uniforms_in_range() {
        let mut r = XorShift64Star::new(0);
        for _ in 0..10_000 {
            let u = r.next_open01();
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn deterministic() {
        let a: Vec<f64> = {
            let mut g = GaussianSource::new(42);
            (0..100).map(|_| g.next_normal()).collect()
        };
        let mut g = GaussianSource::new(42);
        assert!(a.iter().all(|&v| v.to_bits() == g.next_normal().to_bits()));
    }
}
