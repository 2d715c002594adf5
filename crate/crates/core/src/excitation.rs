//! Force time histories built from sums of sinusoids.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{invalid, Result};
use crate::linalg::Mat;

/// `amplitude · sin(2π·hz·t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineTerm {
    pub amplitude: f64,
    pub hz: f64,
    pub phase: f64,
}

impl SineTerm {
    pub const fn new(amplitude: f64, hz: f64) -> Self {
        Self {
            amplitude,
            hz,
            phase: 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (core::f64::consts::TAU * self.hz * t + self.phase).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SineSum {
    pub terms: Vec<SineTerm>,
}

impl SineSum {
    pub fn new(terms: Vec<SineTerm>) -> Self {
        Self { terms }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|s| s.eval(t)).sum()
    }

    /// `n_terms` sinusoids with amplitude uniform in `[0, max_amplitude)`,
    /// frequency uniform in `(0, band_hz]` and phase uniform in `[0, 2π)`.
    pub fn random(n_terms: usize, band_hz: f64, max_amplitude: f64, seed: u64) -> Result<Self> {
        if n_terms == 0 {
            return Err(invalid("n_terms", "at least one sinusoid is required"));
        }
        if !(band_hz > 0.0 && band_hz.is_finite()) {
            return Err(invalid("band_hz", "band limit must be positive"));
        }
        if !(max_amplitude >= 0.0 && max_amplitude.is_finite()) {
            return Err(invalid("max_amplitude", "must be finite and non-negative"));
        }
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut unit = || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let terms = (0..n_terms)
            .map(|_| {
                let amplitude = max_amplitude * unit();
                let hz = band_hz * (1.0 - unit());
                let phase = core::f64::consts::TAU * unit();
                SineTerm {
                    amplitude,
                    hz,
                    phase,
                }
            })
            .collect();
        Ok(Self { terms })
    }
}

/// Samples `profiles` at `t_k = k·dt` for `k = 0..=n_steps`, one row per
/// instant and one column per profile.
pub fn sample_profiles(profiles: &[SineSum], dt: f64, n_steps: usize) -> Mat {
    Mat::from_fn(n_steps + 1, profiles.len(), |k, j| profiles[j].eval(k as f64 * dt))
}

/// Four two-tone force channels (x and y at two load points).
pub fn benchmark_profiles() -> [SineSum; 4] {
    let pair = |a: SineTerm, b: SineTerm| SineSum::new(alloc::vec![a, b]);
    [
        pair(SineTerm::new(200.0, 15.0), SineTerm::new(370.0, 87.5)),
        pair(SineTerm::new(500.0, 50.0), SineTerm::new(460.0, 47.5)),
        pair(SineTerm::new(460.0, 75.0), SineTerm::new(280.0, 15.0)),
        pair(SineTerm::new(280.0, 60.0), SineTerm::new(370.0, 11.5)),
    ]
}

pub const BENCHMARK_NAMES: [&str; 4] = ["f1x", "f1y", "f2x", "f2y"];
