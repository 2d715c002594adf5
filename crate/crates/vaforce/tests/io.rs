use std::fs;

use vaforce::csvio::{read_series, write_series, Series};
use vaforce::manifest::{load_model, save_model};
use vaforce::IoError;
use vaforce_core::excitation::{benchmark_profiles, sample_profiles};
use vaforce_core::identify::recover_physical;
use vaforce_core::metrics::assemble_measurement_vector;
use vaforce_core::newmark::Integrator;
use vaforce_core::{generate_toy, reduce, DampingSpec, Mat, NewmarkParams, RomSpec, SelectionConfig, ToyModelSpec, Vector};

fn identity_mtx(n: usize) -> String {
    let mut s = format!("%%MatrixMarket matrix coordinate real symmetric\n{n} {n} {n}\n");
    for i in 1..=n {
        s.push_str(&format!("{i} {i} 1.0\n"));
    }
    s
}

fn write_identity_model(dir: &std::path::Path, with_kf: bool) -> std::path::PathBuf {
    for name in ["ms", "ks", "mf", "kf"] {
        fs::write(dir.join(format!("{name}.mtx")), identity_mtx(2)).unwrap();
    }
    fs::write(dir.join("c.mtx"), "%%MatrixMarket matrix array real general\n2 2\n0\n0\n0\n0\n").unwrap();
    let mut text = String::from("# identity blocks\nMs = ms.mtx\nKs = ks.mtx\nMf = mf.mtx\nC = c.mtx\nrho_f = 1\nc = 1\nacc_idx = 0, 1\nforce_idx = 0\n");
    if with_kf {
        text.push_str("Kf = kf.mtx\n");
    }
    let path = dir.join("model.txt");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn identity_blocks_load() {
    let dir = tempfile::tempdir().unwrap();
    let (sys, sel) = load_model(&write_identity_model(dir.path(), true)).unwrap();
    assert_eq!(sys.n_dof(), 4);
    assert_eq!(sys.ms(), &Mat::identity(2, 2));
    assert_eq!(sel.acc_idx, vec![0, 1]);
    assert_eq!(sel.force_idx, vec![0]);
}

#[test]
fn missing_block_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_model(&write_identity_model(dir.path(), false)).unwrap_err();
    assert!(matches!(&err, IoError::MissingKey { key, .. } if key == "Kf"), "{err}");
    assert!(err.to_string().contains("Kf"));
}

#[test]
fn bad_selection_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_identity_model(dir.path(), true);
    let text = fs::read_to_string(&path).unwrap().replace("force_idx = 0", "force_idx = 7");
    fs::write(&path, text).unwrap();
    assert!(matches!(load_model(&path), Err(IoError::Model { .. })));
}

#[test]
fn saved_toy_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let sys = generate_toy(&ToyModelSpec::default()).unwrap();
    let sel = SelectionConfig {
        acc_idx: vec![2, 4, 8, 12, 14, 18],
        force_idx: vec![4, 8, 14, 18],
        ..Default::default()
    };
    let path = save_model(dir.path(), &sys, &sel).unwrap();
    let (back, back_sel) = load_model(&path).unwrap();
    assert_eq!(back_sel, sel);
    for (a, b) in [
        (sys.ms(), back.ms()),
        (sys.ks(), back.ks()),
        (sys.mf(), back.mf()),
        (sys.kf(), back.kf()),
        (sys.coupling(), back.coupling()),
    ] {
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(back.rho_f().to_bits(), sys.rho_f().to_bits());
    assert_eq!(back.sound_speed().to_bits(), sys.sound_speed().to_bits());
}

#[test]
fn six_channel_measurements_round_trip_through_csv() {
    let sys = generate_toy(&ToyModelSpec {
        youngs_modulus: 2.1e5,
        ..Default::default()
    })
    .unwrap();
    let rom = reduce(&sys, &RomSpec::new(10, 10), &DampingSpec::default()).unwrap();
    let sel = SelectionConfig {
        acc_idx: vec![2, 4, 8, 12, 14, 18],
        force_idx: vec![4, 8, 14, 18],
        ..Default::default()
    };
    let params = NewmarkParams::average_acceleration(1e-3).unwrap();
    let forces = sample_profiles(&benchmark_profiles(), 1e-3, 500);
    let integ = Integrator::new(rom.second_order(&sel.force_idx).unwrap(), params).unwrap();
    let m = rom.n_reduced();
    let states = integ.integrate(&Vector::zeros(m), &Vector::zeros(m), None, &forces).unwrap();
    let phys: Vec<_> = states[1..].iter().map(|s| recover_physical(&rom, s)).collect();
    let z = assemble_measurement_vector(&phys, &sel).unwrap();
    assert_eq!(z.ncols(), 6);
    let names: Vec<String> = sel.acc_idx.iter().map(|i| format!("a{i}")).collect();
    let s = Series::uniform(names, 1e-3, 1, z.clone());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.csv");
    write_series(&path, &s).unwrap();
    let back = read_series(&path).unwrap();
    assert!(back.data.iter().zip(z.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(back.t, s.t);
}
