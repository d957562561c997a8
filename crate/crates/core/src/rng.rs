//! SplitMix64 uniforms with Box-Muller normals.
//!
//! The integer stream is fixed by the SplitMix64 constants so that any
//! implementation seeded identically produces the same `u64` sequence.

use std::f64::consts::TAU;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Generator state: the SplitMix64 counter plus the spare Box-Muller normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RngState {
    state: u64,
    cached_gaussian: Option<f64>,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            cached_gaussian: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate. Each Box-Muller pair yields two normals; the
    /// second is cached and returned by the following call.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.cached_gaussian.take() {
            return z;
        }
        // 1 - u lies in (0, 1], so the logarithm is finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = TAU * u2;
        self.cached_gaussian = Some(radius * angle.sin());
        radius * angle.cos()
    }
}
