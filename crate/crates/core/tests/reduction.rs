mod common;

use proptest::prelude::*;
use vaforce_core::rom::{eigenvalue_error, nonzero_spectrum};
use vaforce_core::system::assemble_blocks;
use vaforce_core::{generate_toy, reduce, CoupledSystem, DampingSpec, Mat, RomSpec, ToyModelSpec};

/// Sign of `det(B − λA)` from a pivoted LU.
fn det_sign(a: &Mat, b: &Mat, lambda: f64) -> f64 {
    let lu = (b - a * lambda).lu();
    let diag = lu.u().diagonal().iter().fold(1.0, |s, &x| s * x.signum());
    diag * lu.p().determinant::<f64>()
}

/// Checks that every value brackets a sign change of the characteristic
/// determinant within `rel`, and that the roots are distinct.
fn assert_roots(a: &Mat, b: &Mat, vals: &[f64], rel: f64) {
    for (i, &l) in vals.iter().enumerate() {
        let (lo, hi) = (l - rel * l.abs(), l + rel * l.abs());
        assert!(det_sign(a, b, lo) != det_sign(a, b, hi), "no root near λ[{i}] = {l}");
        if i > 0 {
            assert!(vals[i - 1] < lo, "roots {} and {l} not separated", vals[i - 1]);
        }
    }
}

fn symmetric_pair_spectrum(m: &Mat, k: &Mat) -> Vec<f64> {
    let l = m.clone().cholesky().unwrap().l();
    let li = l.clone().try_inverse().unwrap();
    let c = &li * k * li.transpose();
    let mut vals: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs())
        .fold(0.0, f64::max)
}

fn toys() -> Vec<ToyModelSpec> {
    let mut soft = common::soft_spec(15);
    soft.n_fluid_elems = 12;
    let steel = ToyModelSpec {
        n_struct_elems: 14,
        n_fluid_elems: 15,
        ..Default::default()
    };
    vec![soft, steel]
}

#[test]
fn assembled_pencil_matches_oracle() {
    for spec in toys() {
        let sys = generate_toy(&spec).unwrap();
        let full = sys.assemble().unwrap();
        let ours = nonzero_spectrum(&full.a, &full.b).unwrap();
        assert_eq!(ours.len(), full.n_dof());
        assert_roots(&full.a, &full.b, &ours, 1e-8);
    }
}

#[test]
fn all_modes_rom_preserves_spectrum() {
    for spec in toys() {
        let sys = generate_toy(&spec).unwrap();
        let full = sys.assemble().unwrap();
        assert!(full.n_dof() <= 40);
        let rom = reduce(&sys, &RomSpec::new(sys.n_struct(), sys.n_fluid()), &DampingSpec::default()).unwrap();
        let reduced = nonzero_spectrum(&rom.a_hat, &rom.b_hat).unwrap();
        assert_eq!(reduced.len(), full.n_dof());
        assert_roots(&full.a, &full.b, &reduced, 1e-8);
        let errs = eigenvalue_error(&full, &rom, full.n_dof()).unwrap();
        assert!(errs.iter().all(|&e| e <= 1e-8), "{errs:?}");
    }
}

fn lowest_third_errors(spec: &ToyModelSpec) -> Vec<f64> {
    let sys = generate_toy(spec).unwrap();
    let full = sys.assemble().unwrap();
    let rom = reduce(&sys, &RomSpec::new(sys.n_struct() / 3, sys.n_fluid() / 3), &DampingSpec::default()).unwrap();
    eigenvalue_error(&full, &rom, rom.n_reduced() / 3).unwrap()
}

#[test]
fn truncated_rom_resolves_lowest_third() {
    let spec = ToyModelSpec {
        n_struct_elems: 120,
        n_fluid_elems: 120,
        ..Default::default()
    };
    let errs = lowest_third_errors(&spec);
    assert_eq!(errs.len(), 26);
    assert!(errs.iter().all(|&e| e <= 1e-3), "{errs:?}");
}

#[test]
fn coarse_truncation_regression() {
    let recorded = [
        [5.625827476811154e-6, 4.063435632410584e-4, 2.6638736239612275e-3],
        [5.133531607115332e-7, 4.546706050086274e-4, 6.807544917831554e-3],
    ];
    for (spec, rec) in toys().iter().zip(recorded) {
        let errs = lowest_third_errors(spec);
        for (e, r) in errs.iter().zip(rec) {
            assert!((e - r).abs() <= 1e-3 * r, "{errs:?}");
        }
    }
}

#[test]
fn uncoupled_spectrum_is_union_of_fields() {
    for mut spec in toys() {
        spec.coupled = false;
        let sys = generate_toy(&spec).unwrap();
        let full = sys.assemble().unwrap();
        let mut union = symmetric_pair_spectrum(sys.ms(), sys.ks());
        union.extend(symmetric_pair_spectrum(sys.mf(), sys.kf()));
        union.sort_by(f64::total_cmp);
        let ours = nonzero_spectrum(&full.a, &full.b).unwrap();
        assert!(max_rel(&ours, &union) <= 1e-8);
    }
}

#[test]
fn projection_and_orthonormality() {
    let sys = generate_toy(&common::soft_spec(20)).unwrap();
    let full = sys.assemble().unwrap();
    let rom = reduce(&sys, &RomSpec::new(8, 6), &common::damping()).unwrap();
    let rel = |x: &Mat, y: &Mat| (x - y).norm() / y.norm();
    assert!(rel(&(rom.t.transpose() * &full.a * &rom.t), &rom.a_hat) <= 1e-12);
    assert!(rel(&(rom.t.transpose() * &full.b * &rom.t), &rom.b_hat) <= 1e-12);
    let ns = sys.n_struct();
    let phi = rom.t.view((0, 0), (ns, 8)).into_owned();
    assert!(rel(&(phi.transpose() * sys.ms() * &phi), &Mat::identity(8, 8)) <= 1e-10);
    assert!(rom.t.view((ns, 0), (sys.n_fluid(), 8)).amax() == 0.0);
}

fn spd(n: usize, seed: &[f64]) -> Mat {
    let r = Mat::from_fn(n, n, |i, j| (seed[(i * n + j) % seed.len()] * (1.0 + i as f64)).sin());
    &r * r.transpose() + Mat::identity(n, n) * n as f64
}

fn sym(n: usize, seed: &[f64]) -> Mat {
    let r = Mat::from_fn(n, n, |i, j| (seed[(i + 3 * j) % seed.len()] * 1.7).cos());
    &r + r.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assembly_is_linear(
        seed in prop::collection::vec(-3.0f64..3.0, 8..16),
        alpha in 0.1f64..5.0,
        beta in 0.1f64..5.0,
        scale in 0.5f64..4.0,
    ) {
        let (ns, nf) = (3, 2);
        let a = CoupledSystem::new(spd(ns, &seed), sym(ns, &seed), spd(nf, &seed[1..]), sym(nf, &seed[2..]),
            Mat::from_fn(ns, nf, |i, j| seed[i + j]), 1.0, scale.sqrt()).unwrap();
        let rev: Vec<f64> = seed.iter().rev().copied().collect();
        let b = CoupledSystem::new(spd(ns, &rev), sym(ns, &rev), spd(nf, &rev[1..]), sym(nf, &rev[2..]),
            Mat::from_fn(ns, nf, |i, j| rev[i * 2 + j]), 1.0, scale.sqrt()).unwrap();
        let fa = a.assemble().unwrap();
        let fb = b.assemble().unwrap();
        let mix = |x: &Mat, y: &Mat| x * alpha + y * beta;
        let combined = assemble_blocks(
            &mix(a.ms(), b.ms()), &mix(a.ks(), b.ks()), &mix(a.mf(), b.mf()), &mix(a.kf(), b.kf()),
            &mix(a.coupling(), b.coupling()), a.coupling_scale(),
        ).unwrap();
        let tol = 1e-12 * (fa.a.amax() + fa.b.amax() + fb.a.amax() + fb.b.amax()) * (alpha + beta);
        prop_assert!((&combined.a - mix(&fa.a, &fb.a)).amax() <= tol);
        prop_assert!((&combined.b - mix(&fa.b, &fb.b)).amax() <= tol);
    }
}
