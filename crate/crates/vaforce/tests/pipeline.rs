use std::fs;
use std::path::Path;
use std::process::Command;

use vaforce::config::{AlphaConfig, ExperimentConfig, Method};
use vaforce::csvio::read_series;
use vaforce::harness;

fn benchmark(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/benchmark.toml")).unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

#[test]
fn benchmark_scenario_scores_every_channel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = benchmark(dir.path());
    let r = harness::run_scenario(&cfg).unwrap();
    assert!(!r.trivial);
    assert_eq!(r.geers.len(), 8);
    for e in &r.geers {
        assert!(e.comp.is_finite() && e.comp < 1.0, "{} {}: {}", e.quantity, e.channel, e.comp);
    }
    let t = r.timing(harness::PROPOSED).unwrap();
    assert!(t.real_time_factor > 0.0);
    assert!(r.artifacts.iter().all(|p| p.exists()));
    let errors = fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 9);
    let report = fs::read_to_string(dir.path().join("report.toml")).unwrap();
    assert!(report.contains("xoshiro256++"));
}

#[test]
fn zero_forces_are_flagged_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = benchmark(dir.path());
    cfg.duration = 0.2;
    for f in &mut cfg.forces {
        for t in f.terms.as_mut().unwrap() {
            t.amplitude = 0.0;
        }
    }
    let r = harness::run_scenario(&cfg).unwrap();
    assert!(r.trivial);
    assert!(r.geers.iter().all(|e| e.quantity != "force"));
    assert!(r.notices.iter().any(|n| n.contains("trivial")));
}

#[test]
fn both_methods_share_a_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = benchmark(dir.path());
    cfg.duration = 0.5;
    cfg.method = Method::Both;
    cfg.alpha = AlphaConfig::Fixed(0.0);
    harness::run_scenario(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,dt,eps_comp,wall_time_s");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("proposed,0.001,") && lines[2].starts_with("akf,0.001,"));
}

#[test]
fn overlay_legends_use_config_channel_names() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = benchmark(dir.path());
    cfg.duration = 0.2;
    harness::run_scenario(&cfg).unwrap();
    for name in ["f1x", "f1y", "f2x", "f2y"] {
        let svg = fs::read_to_string(dir.path().join(format!("plot_force_{name}.svg"))).unwrap();
        assert!(svg.contains(&format!(">{name} reference<")));
        assert!(svg.contains(&format!(">{name} proposed<")));
    }
    let forces = read_series(&dir.path().join("forces_proposed.csv")).unwrap();
    assert_eq!(forces.names, ["f1x", "f1y", "f2x", "f2y"]);
}

#[test]
fn noise_free_sweep_recovers_forces() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = benchmark(dir.path());
    cfg.alpha = AlphaConfig::Fixed(0.0);
    cfg.repeats = 2;
    let r = harness::run_noise_sweep(&cfg, &[0.0]).unwrap();
    assert!(r.rows[0].mean_comp <= 1e-8, "{}", r.rows[0].mean_comp);
}

#[test]
fn single_equal_filter_step_skips_trends() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = benchmark(dir.path());
    cfg.akf.duration = Some(0.05);
    let r = harness::run_akf_comparison(&cfg, 1e-3, &[1e-3]).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert!(r.akf_monotone.is_none() && r.proposed_faster.is_none());
    assert!(r.notices.iter().any(|n| n.contains("skipped")));
    assert!(harness::run_akf_comparison(&cfg, 1e-3, &[1e-2]).is_err());
}

#[test]
fn l_curve_reports_corner_and_best() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = benchmark(dir.path());
    cfg.duration = 2.0;
    cfg.alpha = AlphaConfig::LCurve {
        l_curve: vaforce::config::LCurveConfig {
            lo: 1e-10,
            hi: 1e2,
            points: 7,
            window: Some(1000),
            relative: true,
        },
    };
    let r = harness::l_curve(&cfg).unwrap();
    assert_eq!(r.rows.len(), 7);
    assert!(r.rows.iter().any(|x| x.alpha == r.alpha));
    assert!(dir.path().join("l_curve.csv").exists());
}

#[test]
fn stage_errors_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = benchmark(dir.path());
    cfg.selection.acc_idx = vec![2, 400];
    let err = harness::run_scenario(&cfg).unwrap_err();
    assert!(format!("{err:#}").contains("stage model"), "{err:#}");
}

#[test]
fn cli_validate_model_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/benchmark.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_vaforce"))
        .args(["validate-model", "--quiet", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert!(dir.path().join("eigen_errors.csv").exists());
    let missing = Command::new(env!("CARGO_BIN_EXE_vaforce")).arg("run").output().unwrap();
    assert!(!missing.status.success());
}

#[test]
fn cli_sweep_at_zero_alpha_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/benchmark.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_vaforce"))
        .args(["noise-sweep", "--quiet", "--alpha", "0", "--taus", "0,0.02", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(sweep.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0")));
}
