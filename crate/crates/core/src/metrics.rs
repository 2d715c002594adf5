//! Geers error measures, seeded measurement noise and measurement assembly.
//!
//! Noise streams use xoshiro256++ seeded through SplitMix64
//! (`seed_from_u64`) with Box–Muller Gaussian sampling. Each call draws one
//! stream and fills channels one after another, so a given seed reproduces
//! the same samples on any platform.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{dim, invalid, Error, Result};
use crate::linalg::Mat;
use crate::newmark::State;
use crate::system::SelectionConfig;

/// Identifier stored in run metadata next to the seed.
pub const NOISE_ALGORITHM: &str = "xoshiro256++/splitmix64 seeding, Box-Muller";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub tau: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(tau: f64, seed: u64) -> Result<Self> {
        let s = Self { tau, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(invalid("tau", "noise rate must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Sample standard deviation with the `n − 1` denominator; zero for fewer
/// than two samples.
pub fn sample_std(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Standard normal sampler over xoshiro256++.
#[derive(Debug, Clone)]
pub struct Gaussian {
    rng: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl Gaussian {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `(0, 1]`.
    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let r = (-2.0 * self.uniform().ln()).sqrt();
        let theta = core::f64::consts::TAU * self.uniform();
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Adds `τ·σ_j·N(0,1)` to every column `j` of `signal`, where `σ_j` is the
/// sample standard deviation of that clean column.
pub fn add_noise(signal: &Mat, spec: &NoiseSpec) -> Mat {
    let mut out = signal.clone();
    if spec.tau == 0.0 {
        return out;
    }
    let mut g = Gaussian::new(spec.seed);
    for j in 0..signal.ncols() {
        let col = signal.column(j);
        let sigma = sample_std(col.as_slice());
        let scale = spec.tau * sigma;
        for i in 0..signal.nrows() {
            let n = g.sample();
            if scale != 0.0 {
                out[(i, j)] += scale * n;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeersErrors {
    pub mag: f64,
    pub phase: f64,
    pub comp: f64,
}

impl GeersErrors {
    fn from_parts(mag: f64, phase: f64) -> Self {
        Self {
            mag,
            phase,
            comp: mag.hypot(phase),
        }
    }
}

/// Magnitude, phase and comprehensive errors of `identified` against
/// `reference`.
///
/// ```text
/// ε_mag   = √Σzn² / √Σzm² − 1
/// ε_phase = 1 − √|Σzn·zm| / √(√Σzn² · √Σzm²)
/// ε_comp  = √(ε_mag² + ε_phase²)
/// ```
///
/// The phase term only sees `|Σzn·zm|`, so a sign-flipped signal scores
/// zero. An all-zero identified signal scores `(−1, 1, √2)`.
pub fn geers_errors(identified: &[f64], reference: &[f64]) -> Result<GeersErrors> {
    if identified.len() != reference.len() {
        return Err(dim("identified series", reference.len(), identified.len()));
    }
    if reference.len() < 2 {
        return Err(invalid("series", "at least two samples are required"));
    }
    crate::linalg::check_finite("identified series", identified)?;
    crate::linalg::check_finite("reference series", reference)?;
    let snn: f64 = identified.iter().map(|v| v * v).sum();
    let smm: f64 = reference.iter().map(|v| v * v).sum();
    let snm: f64 = identified.iter().zip(reference).map(|(a, b)| a * b).sum();
    if smm == 0.0 {
        return Err(invalid("reference", "reference signal is identically zero"));
    }
    let (nn, nm) = (snn.sqrt(), smm.sqrt());
    let mag = nn / nm - 1.0;
    let phase = if snn == 0.0 {
        1.0
    } else {
        (1.0 - snm.abs().sqrt() / (nn * nm).sqrt()).clamp(0.0, 1.0)
    };
    Ok(GeersErrors::from_parts(mag, phase))
}

/// Column-wise Geers errors for two equally shaped sample tables.
pub fn geers_columns(identified: &Mat, reference: &Mat) -> Result<Vec<GeersErrors>> {
    if identified.shape() != reference.shape() {
        return Err(dim(
            "identified table",
            alloc::format!("{:?}", reference.shape()),
            alloc::format!("{:?}", identified.shape()),
        ));
    }
    (0..reference.ncols())
        .map(|j| {
            geers_errors(
                identified.column(j).as_slice(),
                reference.column(j).as_slice(),
            )
        })
        .collect()
}

/// Stacks the selected displacement, velocity and acceleration DOFs of each
/// state into one row per sample.
pub fn assemble_measurement_vector(states: &[State], sel: &SelectionConfig) -> Result<Mat> {
    let nz = sel.n_measurements();
    let mut z = Mat::zeros(states.len(), nz);
    for (k, s) in states.iter().enumerate() {
        let n = s.len();
        let mut col = 0;
        for (what, idx, src) in [
            ("displacement index", &sel.disp_idx, &s.d),
            ("velocity index", &sel.vel_idx, &s.v),
            ("acceleration index", &sel.acc_idx, &s.a),
        ] {
            for &i in idx {
                if i >= n {
                    return Err(Error::IndexOutOfRange {
                        what: alloc::string::ToString::to_string(what),
                        index: i,
                        size: n,
                    });
                }
                z[(k, col)] = src[i];
                col += 1;
            }
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;

    fn close(g: GeersErrors, want: (f64, f64, f64)) {
        assert!((g.mag - want.0).abs() <= 1e-12, "{g:?}");
        assert!((g.phase - want.1).abs() <= 1e-12, "{g:?}");
        assert!((g.comp - want.2).abs() <= 1e-12, "{g:?}");
    }

    fn sine(n: usize, shift: f64) -> Vec<f64> {
        (0..n)
            .map(|i| (0.01 * i as f64 * core::f64::consts::TAU + shift).sin())
            .collect()
    }

    #[test]
    fn geers_reference_cases() {
        let r = sine(500, 0.3);
        close(geers_errors(&r, &r).unwrap(), (0.0, 0.0, 0.0));
        let twice: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
        close(geers_errors(&twice, &r).unwrap(), (1.0, 0.0, 1.0));
        close(geers_errors(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), (0.0, 1.0, 1.0));
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        close(geers_errors(&neg, &r).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn geers_rejects_bad_input() {
        assert!(geers_errors(&[1.0, 2.0], &[0.0, 0.0]).is_err());
        assert!(geers_errors(&[1.0], &[1.0]).is_err());
        assert!(geers_errors(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(geers_errors(&[f64::NAN, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn geers_zero_identified() {
        let g = geers_errors(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!((g.mag, g.phase), (-1.0, 1.0));
    }

    #[test]
    fn geers_scale_and_shift_sensitivity() {
        let r = sine(400, 0.0);
        let mut last = 0.0;
        for s in [1.1, 1.5, 2.0, 3.0] {
            let x: Vec<f64> = r.iter().map(|v| s * v).collect();
            let g = geers_errors(&x, &r).unwrap();
            assert!(g.mag > last);
            last = g.mag;
        }
        let g = geers_errors(&sine(400, 0.4), &r).unwrap();
        assert!(g.phase > 1e-3 && g.comp > 1e-3);
    }

    #[test]
    fn noise_trivial_cases() {
        let sig = Mat::from_fn(100, 2, |i, j| if j == 0 { 3.0 } else { i as f64 });
        assert_eq!(add_noise(&sig, &NoiseSpec::new(0.0, 1).unwrap()), sig);
        let out = add_noise(&sig, &NoiseSpec::new(0.05, 1).unwrap());
        assert_eq!(out.column(0), sig.column(0));
        assert_ne!(out.column(1), sig.column(1));
    }

    #[test]
    fn noise_level_matches_tau() {
        let n = 10_000;
        let sig = Mat::from_fn(n, 1, |i, _| (0.013 * i as f64).sin() * 4.0);
        let spec = NoiseSpec::new(0.01, 42).unwrap();
        let out = add_noise(&sig, &spec);
        let diff: Vec<f64> = (0..n).map(|i| out[(i, 0)] - sig[(i, 0)]).collect();
        let sigma = sample_std(sig.column(0).as_slice());
        let got = sample_std(&diff);
        assert!((got / (0.01 * sigma) - 1.0).abs() < 0.05, "{got}");
    }

    #[test]
    fn noise_is_seeded() {
        let sig = Mat::from_fn(64, 3, |i, j| (i * (j + 1)) as f64);
        let a = add_noise(&sig, &NoiseSpec::new(0.02, 7).unwrap());
        let b = add_noise(&sig, &NoiseSpec::new(0.02, 7).unwrap());
        let c = add_noise(&sig, &NoiseSpec::new(0.02, 8).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(NoiseSpec::new(-0.1, 0).is_err());
    }

    #[test]
    fn unbiased_std() {
        assert_eq!(sample_std(&[1.0, 3.0]), 2f64.sqrt());
        assert_eq!(sample_std(&[5.0]), 0.0);
    }

    #[test]
    fn measurement_stacking() {
        let s = State {
            d: Vector::from_vec(alloc::vec![1.0, 2.0, 3.0]),
            v: Vector::from_vec(alloc::vec![4.0, 5.0, 6.0]),
            a: Vector::from_vec(alloc::vec![7.0, 8.0, 9.0]),
        };
        let sel = SelectionConfig {
            disp_idx: alloc::vec![2],
            vel_idx: alloc::vec![0],
            acc_idx: alloc::vec![1, 2],
            force_idx: alloc::vec![0],
        };
        let z = assemble_measurement_vector(&[s.clone(), s.scaled(2.0)], &sel).unwrap();
        assert_eq!(z.row(0).iter().copied().collect::<Vec<_>>(), [3.0, 4.0, 8.0, 9.0]);
        assert_eq!(z[(1, 3)], 18.0);

        let empty = assemble_measurement_vector(core::slice::from_ref(&s), &SelectionConfig::default()).unwrap();
        assert_eq!(empty.ncols(), 0);

        let bad = SelectionConfig {
            acc_idx: alloc::vec![3],
            ..Default::default()
        };
        assert!(assemble_measurement_vector(&[s], &bad).is_err());
    }
}
