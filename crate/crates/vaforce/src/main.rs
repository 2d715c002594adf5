use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use vaforce::config::{AlphaConfig, ExperimentConfig};
use vaforce::harness;

/// Inverse force identification experiments on coupled structural-acoustic
/// models.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Noise seed; overrides `noise.seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fixed regularization parameter; overrides `alpha` from the config.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward solve, pollute, identify and score one scenario.
    Run,
    /// Averaged errors over a range of noise levels.
    NoiseSweep {
        /// Noise levels; defaults to `sweep.taus`.
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
    },
    /// Proposed identifier against the augmented Kalman filter.
    AkfCompare {
        /// Filter time steps; defaults to `akf.dts`.
        #[arg(long, value_delimiter = ',')]
        dts: Option<Vec<f64>>,
    },
    /// Reduced against full eigenvalues.
    ValidateModel,
    /// L-curve for the regularization parameter.
    LCurve,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("--config <path> is required"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.noise.seed = seed;
    }
    if let Some(alpha) = cli.alpha {
        cfg.alpha = AlphaConfig::Fixed(alpha);
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load(cli)?;
    let say = |s: String| {
        if !cli.quiet {
            println!("{s}");
        }
    };
    let ok = match &cli.command {
        Command::Run => {
            let r = harness::run_scenario(&cfg)?;
            for e in &r.geers {
                say(format!(
                    "{:<9} {:<12} {:<8} mag {:+.4e}  phase {:.4e}  comp {:.4e}",
                    e.method, e.quantity, e.channel, e.mag, e.phase, e.comp
                ));
            }
            for t in &r.timings {
                say(format!("{:<9} wall {:.4e} s  rtf {:.4e}", t.method, t.wall_time_s, t.real_time_factor));
            }
            r.notices.iter().for_each(|n| say(format!("note: {n}")));
            true
        }
        Command::NoiseSweep { taus } => {
            let taus = taus.clone().unwrap_or_else(|| cfg.sweep.taus.clone());
            let r = harness::run_noise_sweep(&cfg, &taus)?;
            for row in &r.rows {
                say(format!(
                    "tau {:<6} mean comp {:.4e} +- {:.2e} ({} runs)",
                    row.tau, row.mean_comp, row.stderr_comp, row.repeats
                ));
            }
            r.notices.iter().for_each(|n| say(format!("note: {n}")));
            r.non_decreasing
        }
        Command::AkfCompare { dts } => {
            let dts = dts.clone().unwrap_or_else(|| cfg.akf.dts.clone());
            let r = harness::run_akf_comparison(&cfg, cfg.newmark.dt, &dts)?;
            for row in &r.rows {
                say(format!(
                    "{:<9} dt {:<8e} comp {:.4e}  wall {:.4e} s",
                    row.method, row.dt, row.mean_comp, row.wall_time_s
                ));
            }
            r.notices.iter().for_each(|n| say(format!("note: {n}")));
            r.trends_hold()
        }
        Command::ValidateModel => {
            let r = harness::validate_model(&cfg)?;
            say(format!(
                "{} DOFs reduced to {}; lowest {} eigenvalues within {:.3e}",
                r.n_dof, r.n_reduced, r.checked_modes, r.max_rel_error
            ));
            true
        }
        Command::LCurve => {
            let r = harness::l_curve(&cfg)?;
            say(format!(
                "alpha {:e}{}; lowest force error at {:e}",
                r.alpha,
                if r.degenerate { " (degenerate)" } else { "" },
                r.best_alpha
            ));
            true
        }
    };
    say(format!("artifacts in {}", cfg.out_dir.display()));
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
