//! Experiment pipeline: model, reduction, reference forward solve,
//! measurement pollution, identification and scoring, with every number
//! written to CSV next to a TOML report.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use vaforce_core::akf::{augment, build_state_space, default_process_noise, run_filter, FilterState};
use vaforce_core::excitation::{sample_profiles, SineSum};
use vaforce_core::identify::{l_curve_select_alpha, precompute_gain, recover_physical, LCurveResult};
use vaforce_core::metrics::{
    add_noise, assemble_measurement_vector, geers_errors, sample_std, NoiseSpec, NOISE_ALGORITHM,
};
use vaforce_core::newmark::Integrator;
use vaforce_core::rom::{eigenvalue_error, nonzero_spectrum};
use vaforce_core::{
    generate_toy, reduce, CoupledSystem, Identifier, IdentifierConfig, Mat, NewmarkParams, ReducedModel,
    SelectionConfig, State, Vector,
};

use crate::config::{AkfConfig, AlphaConfig, ExperimentConfig, LCurveConfig};
use crate::csvio::{fmt_f64, write_series, write_table, Series};
use crate::manifest::load_model;
use crate::plot::{emit_plots, Line, Plot};
use crate::report::{
    write_report, ChannelError, ComparisonReport, ComparisonRow, EigenRow, LCurveReport, LCurveRow, RunMeta,
    RunReport, SweepReport, SweepRow, Timing, ValidationReport,
};

pub const PROPOSED: &str = "proposed";
pub const AKF: &str = "akf";

/// Model, selection and reduced model shared by every run of a config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub sys: CoupledSystem,
    pub sel: SelectionConfig,
    pub rom: ReducedModel,
    pub force_names: Vec<String>,
    pub profiles: Vec<SineSum>,
    pub response_idx: Vec<usize>,
}

impl Prepared {
    pub fn response_names(&self) -> Vec<String> {
        self.response_idx.iter().map(|i| format!("u{i}")).collect()
    }

    pub fn measurement_names(&self) -> Vec<String> {
        let s = &self.sel;
        let tag = |p: &str, idx: &[usize]| idx.iter().map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        [tag("u", &s.disp_idx), tag("v", &s.vel_idx), tag("a", &s.acc_idx)].concat()
    }
}

/// Builds the model and its reduction. The selection always comes from
/// the config; index lists inside a manifest are ignored.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let sys = if let Some(toy) = &cfg.model.toy {
        generate_toy(&toy.spec()).context("stage model: toy generation")?
    } else {
        let path = cfg.base_dir.join(cfg.model.manifest.as_ref().expect("validated model"));
        load_model(&path).context("stage model: manifest")?.0
    };
    let sel = cfg.selection.selection();
    sel.validate(sys.n_dof()).context("stage model: selection")?;
    let response_idx = cfg.response_idx();
    for &i in &response_idx {
        ensure!(i < sys.n_dof(), "stage model: response index {i} out of range for {} DOFs", sys.n_dof());
    }
    let rom = reduce(&sys, &cfg.rom.spec(), &cfg.damping.spec()).context("stage reduction")?;
    let (force_names, profiles) = cfg.ordered_forces()?;
    Ok(Prepared {
        sys,
        sel,
        rom,
        force_names,
        profiles,
        response_idx,
    })
}

/// Clean forward solution sampled at `t_1 … t_N`.
#[derive(Debug, Clone)]
pub struct Reference {
    pub params: NewmarkParams,
    pub steps: usize,
    /// Reduced state at `t = 0`.
    pub s0: State,
    pub forces: Mat,
    pub displacements: Mat,
    pub z: Mat,
}

pub fn step_count(duration: f64, dt: f64) -> Result<usize> {
    let steps = (duration / dt).round();
    ensure!(steps >= 2.0, "duration {duration} s gives fewer than two steps of {dt} s");
    Ok(steps as usize)
}

/// Integrates the reduced model under the configured forces, starting at
/// rest.
pub fn simulate(prep: &Prepared, params: NewmarkParams, duration: f64) -> Result<Reference> {
    let steps = step_count(duration, params.dt)?;
    let forces = sample_profiles(&prep.profiles, params.dt, steps);
    let rom = &prep.rom;
    let m = rom.n_reduced();
    let integ = Integrator::new(rom.second_order(&prep.sel.force_idx)?, params)?;
    let states = integ.integrate(&Vector::zeros(m), &Vector::zeros(m), None, &forces)?;
    let phys: Vec<State> = states[1..].iter().map(|s| recover_physical(rom, s)).collect();
    let z = assemble_measurement_vector(&phys, &prep.sel)?;
    let displacements = Mat::from_fn(steps, prep.response_idx.len(), |k, j| phys[k].d[prep.response_idx[j]]);
    Ok(Reference {
        params,
        steps,
        s0: states[0].clone(),
        forces: forces.rows(1, steps).into_owned(),
        displacements,
        z,
    })
}

/// Identified forces and reconstructed displacements, rows aligned with
/// the measurements.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub method: &'static str,
    pub forces: Mat,
    pub displacements: Mat,
    pub wall_time_s: f64,
}

fn reconstruct(rom: &ReducedModel, idx: &[usize], reduced_d: impl Iterator<Item = Vector>, n: usize) -> Mat {
    let mut out = Mat::zeros(n, idx.len());
    for (k, d) in reduced_d.enumerate() {
        for (j, &i) in idx.iter().enumerate() {
            out[(k, j)] = rom.t.row(i).dot(&d.transpose());
        }
    }
    out
}

/// Identifier configuration for the run's step and regularization.
pub fn identifier_config(prep: &Prepared, params: NewmarkParams, alpha: f64) -> IdentifierConfig {
    IdentifierConfig {
        newmark: params,
        alpha,
        selection: prep.sel.clone(),
    }
}

pub fn identify_proposed(prep: &Prepared, reference: &Reference, alpha: f64, z: &Mat) -> Result<Estimate> {
    let start = Instant::now();
    let id = Identifier::new(&prep.rom, identifier_config(prep, reference.params, alpha))?;
    let run = id.run(Some(&reference.s0), z)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    Ok(finish_proposed(prep, run, wall_time_s))
}

fn finish_proposed(prep: &Prepared, run: vaforce_core::identify::IdentificationRun, wall_time_s: f64) -> Estimate {
    let n = run.forces.nrows();
    let displacements = reconstruct(&prep.rom, &prep.response_idx, run.states.into_iter().map(|s| s.d), n);
    Estimate {
        method: PROPOSED,
        forces: run.forces,
        displacements,
        wall_time_s,
    }
}

/// Runs the augmented Kalman filter at the reference's step.
pub fn identify_akf(prep: &Prepared, akf: &AkfConfig, tau: f64, reference: &Reference, z: &Mat) -> Result<Estimate> {
    let rom = &prep.rom;
    let m = rom.n_reduced();
    let nf = prep.sel.n_forces();
    let r = Mat::from_diagonal(&Vector::from_fn(reference.z.ncols(), |j, _| {
        let sigma = sample_std(reference.z.column(j).as_slice());
        let sd = tau.max(akf.r_floor) * sigma;
        if sd > 0.0 {
            sd * sd
        } else {
            akf.r_floor * akf.r_floor
        }
    }));
    let start = Instant::now();
    let ssm = build_state_space(rom, &prep.sel.force_idx)?;
    let q = default_process_noise(2 * m, nf, akf.q_state, akf.q_force);
    let model = augment(&ssm, reference.params.dt, rom, &prep.sel, q, r)?;
    let mut p0 = Vector::from_element(2 * m + nf, akf.p0_state);
    p0.rows_mut(2 * m, nf).fill(akf.p0_force);
    let mut x0 = Vector::zeros(2 * m + nf);
    x0.rows_mut(0, m).copy_from(&reference.s0.d);
    x0.rows_mut(m, m).copy_from(&reference.s0.v);
    let run = run_filter(&model, &FilterState::new(x0, Mat::from_diagonal(&p0)), z)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let n = run.forces.nrows();
    let displacements = reconstruct(rom, &prep.response_idx, run.states.into_iter().map(|x| x.rows(0, m).into_owned()), n);
    Ok(Estimate {
        method: AKF,
        forces: run.forces,
        displacements,
        wall_time_s,
    })
}

/// Geers errors per column; all-zero reference columns are skipped and
/// returned by name.
pub fn score(method: &str, quantity: &str, names: &[String], est: &Mat, reference: &Mat) -> Result<(Vec<ChannelError>, Vec<String>)> {
    let mut errors = Vec::new();
    let mut zero = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let r = reference.column(j);
        if r.iter().all(|v| *v == 0.0) {
            zero.push(name.clone());
            continue;
        }
        let e = geers_errors(est.column(j).as_slice(), r.as_slice())
            .with_context(|| format!("stage scoring: {method} {quantity} {name}"))?;
        errors.push(ChannelError::new(method, quantity, name, e));
    }
    Ok((errors, zero))
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// `‖Ŝ·G‖²_F`, the natural scale of α.
pub fn alpha_scale(prep: &Prepared, params: NewmarkParams) -> Result<f64> {
    let gain = precompute_gain(&prep.rom, &identifier_config(prep, params, 1.0))?;
    Ok(gain.sg.norm_squared())
}

/// Runs the L-curve over the leading calibration window of `z`.
pub fn select_alpha(prep: &Prepared, reference: &Reference, lc: &LCurveConfig, z: &Mat) -> Result<(Vec<f64>, LCurveResult)> {
    let grid = lc.grid(alpha_scale(prep, reference.params)?);
    let rows = lc.window.unwrap_or(z.nrows()).min(z.nrows());
    let window = z.rows(0, rows).into_owned();
    let base = identifier_config(prep, reference.params, 0.0);
    let res = l_curve_select_alpha(&prep.rom, &base, Some(&reference.s0), &window, &grid)
        .context("stage alpha selection: l-curve")?;
    Ok((grid, res))
}

fn alpha_for(cfg: &ExperimentConfig, prep: &Prepared, reference: &Reference, z: &Mat) -> Result<(f64, String, Option<LCurveResult>)> {
    match cfg.alpha {
        AlphaConfig::Fixed(a) => Ok((a, "fixed".into(), None)),
        AlphaConfig::LCurve { l_curve } => {
            let (_, res) = select_alpha(prep, reference, &l_curve, z)?;
            let source = if res.degenerate {
                "l-curve (degenerate, minimum residual)"
            } else {
                "l-curve"
            };
            Ok((res.alpha, source.into(), Some(res)))
        }
    }
}

fn meta(prep: &Prepared, reference: &Reference, tau: f64, seed: u64, alpha: Option<f64>, alpha_source: &str) -> RunMeta {
    RunMeta {
        noise_algorithm: NOISE_ALGORITHM.into(),
        tau,
        seed,
        dt: reference.params.dt,
        duration: reference.steps as f64 * reference.params.dt,
        steps: reference.steps,
        n_reduced: prep.rom.n_reduced(),
        alpha,
        alpha_source: alpha_source.into(),
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("stage output: creating {}", cfg.out_dir.display()))?;
    Ok(cfg.out_dir.clone())
}

fn errors_rows(errors: &[ChannelError]) -> Vec<Vec<String>> {
    errors
        .iter()
        .map(|e| {
            vec![
                e.method.clone(),
                e.quantity.clone(),
                e.channel.clone(),
                fmt_f64(e.mag),
                fmt_f64(e.phase),
                fmt_f64(e.comp),
            ]
        })
        .collect()
}

fn overlay_plots(prefix: &str, title: &str, unit: &str, names: &[String], dt: f64, reference: &Mat, estimates: &[(&str, &Mat)]) -> Vec<(String, Plot)> {
    let t: Vec<f64> = (1..=reference.nrows()).map(|k| k as f64 * dt).collect();
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut lines = vec![Line::new(format!("{name} reference"), t.clone(), reference.column(j).iter().copied().collect())];
            for (method, m) in estimates {
                lines.push(Line::new(format!("{name} {method}"), t.clone(), m.column(j).iter().copied().collect()));
            }
            let plot = Plot {
                title: format!("{title} {name}"),
                x_label: "t [s]".into(),
                y_label: unit.into(),
                lines,
                ..Default::default()
            };
            (format!("{prefix}_{name}"), plot)
        })
        .collect()
}

/// Forward simulation, pollution, identification with the configured
/// method(s), scoring against the clean reference, and artifact emission.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<RunReport> {
    let prep = prepare(cfg)?;
    let params = cfg.newmark.params()?;
    let reference = simulate(&prep, params, cfg.duration).context("stage forward solve")?;
    let noise = cfg.noise.spec();
    let z = add_noise(&reference.z, &noise);
    let dir = out_dir(cfg)?;
    let mut artifacts = Vec::new();
    let mut notices = Vec::new();

    let mut estimates = Vec::new();
    let mut alpha = None;
    let mut alpha_source = String::from("none");
    if cfg.method.runs_proposed() {
        let (a, source, lc) = alpha_for(cfg, &prep, &reference, &z)?;
        if let Some(lc) = lc {
            let path = dir.join("l_curve.csv");
            let rows = lc
                .points
                .iter()
                .map(|p| vec![fmt_f64(p.alpha), fmt_f64(p.residual_norm), fmt_f64(p.solution_norm), fmt_f64(p.curvature)])
                .collect::<Vec<_>>();
            write_table(&path, &["alpha", "residual_norm", "solution_norm", "curvature"], &rows)?;
            artifacts.push(path);
        }
        alpha = Some(a);
        alpha_source = source;
        estimates.push(identify_proposed(&prep, &reference, a, &z).context("stage identification: proposed")?);
    }
    if cfg.method.runs_akf() {
        estimates.push(identify_akf(&prep, &cfg.akf, noise.tau, &reference, &z).context("stage identification: akf")?);
    }

    let mut geers = Vec::new();
    let mut trivial = false;
    let force_names = &prep.force_names;
    let resp_names = prep.response_names();
    for est in &estimates {
        let (fe, zero_f) = score(est.method, "force", force_names, &est.forces, &reference.forces)?;
        let (de, _) = score(est.method, "displacement", &resp_names, &est.displacements, &reference.displacements)?;
        if zero_f.len() == force_names.len() {
            trivial = true;
        } else if !zero_f.is_empty() {
            notices.push(format!("{}: zero reference force channels skipped: {}", est.method, zero_f.join(", ")));
        }
        geers.extend(fe);
        geers.extend(de);
    }
    if trivial {
        notices.push("reference forces are identically zero; Geers errors are undefined (trivial scenario)".into());
    }

    let dt = params.dt;
    let series = |names: &[String], data: &Mat| Series::uniform(names.to_vec(), dt, 1, data.clone());
    let mut emit = |name: String, s: Series| -> Result<()> {
        let path = dir.join(name);
        write_series(&path, &s)?;
        artifacts.push(path);
        Ok(())
    };
    emit("measurements.csv".into(), series(&prep.measurement_names(), &z))?;
    emit("forces_reference.csv".into(), series(force_names, &reference.forces))?;
    emit("displacements_reference.csv".into(), series(&resp_names, &reference.displacements))?;
    for est in &estimates {
        emit(format!("forces_{}.csv", est.method), series(force_names, &est.forces))?;
        emit(format!("displacements_{}.csv", est.method), series(&resp_names, &est.displacements))?;
    }

    let path = dir.join("errors.csv");
    write_table(&path, &["method", "quantity", "channel", "mag", "phase", "comp"], &errors_rows(&geers))?;
    artifacts.push(path);

    let timings: Vec<Timing> = estimates
        .iter()
        .map(|e| Timing {
            method: e.method.into(),
            dt,
            wall_time_s: e.wall_time_s,
            real_time_factor: e.wall_time_s / reference.steps as f64 / dt,
        })
        .collect();
    let path = dir.join("timing.csv");
    let rows: Vec<Vec<String>> = timings
        .iter()
        .map(|t| vec![t.method.clone(), fmt_f64(t.dt), fmt_f64(t.wall_time_s), fmt_f64(t.real_time_factor)])
        .collect();
    write_table(&path, &["method", "dt", "wall_time_s", "real_time_factor"], &rows)?;
    artifacts.push(path);

    if estimates.len() > 1 {
        let path = dir.join("comparison.csv");
        let rows: Vec<Vec<String>> = estimates
            .iter()
            .map(|e| {
                let comp = mean(geers.iter().filter(|g| g.method == e.method && g.quantity == "force").map(|g| g.comp));
                vec![e.method.to_string(), fmt_f64(dt), fmt_f64(comp), fmt_f64(e.wall_time_s)]
            })
            .collect();
        write_table(&path, &["method", "dt", "eps_comp", "wall_time_s"], &rows)?;
        artifacts.push(path);
    }

    let est_f: Vec<(&str, &Mat)> = estimates.iter().map(|e| (e.method, &e.forces)).collect();
    let est_d: Vec<(&str, &Mat)> = estimates.iter().map(|e| (e.method, &e.displacements)).collect();
    let mut plots = overlay_plots("plot_force", "force", "N", force_names, dt, &reference.forces, &est_f);
    plots.extend(overlay_plots("plot_displacement", "displacement", "m", &resp_names, dt, &reference.displacements, &est_d));
    artifacts.extend(emit_plots(&plots, &dir).context("stage output: plots")?);

    let report = RunReport {
        meta: meta(&prep, &reference, noise.tau, noise.seed, alpha, &alpha_source),
        trivial,
        notices,
        geers,
        timings,
        artifacts,
    };
    let path = dir.join("report.toml");
    let mut report = report;
    report.artifacts.push(path.clone());
    write_report(&path, &report)?;
    Ok(report)
}

/// Applies `f` to `0..n` on scoped threads, keeping the input order.
fn parallel_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = thread::available_parallelism().map_or(1, |w| w.get()).min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let f = &f;
    let mut chunks: Vec<Vec<(usize, T)>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| s.spawn(move || (w..n).step_by(workers).map(|i| (i, f(i))).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut all: Vec<(usize, T)> = chunks.drain(..).flatten().collect();
    all.sort_by_key(|(i, _)| *i);
    all.into_iter().map(|(_, v)| v).collect()
}

/// Seed of repeat `r`: the configured seed offset by the repeat number.
pub fn repeat_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(r as u64)
}

/// For each τ, `repeats` noise realizations identified with one shared
/// gain; force-channel ε are averaged per run, then over runs.
pub fn run_noise_sweep(cfg: &ExperimentConfig, taus: &[f64]) -> Result<SweepReport> {
    ensure!(cfg.repeats >= 1, "repeats must be at least 1");
    ensure!(!taus.is_empty(), "noise sweep needs at least one tau");
    for &t in taus {
        ensure!(t >= 0.0 && t.is_finite(), "tau {t} must be non-negative");
    }
    let prep = prepare(cfg)?;
    let params = cfg.newmark.params()?;
    let reference = simulate(&prep, params, cfg.duration).context("stage forward solve")?;
    let dir = out_dir(cfg)?;
    let seed = cfg.noise.seed;
    let mut artifacts = Vec::new();
    let mut notices = Vec::new();
    let mut rows = Vec::new();
    let mut run_rows = Vec::new();
    let mut alpha_source = "fixed".to_string();
    let mut alphas = Vec::new();
    for &tau in taus {
        let alpha = match cfg.alpha {
            AlphaConfig::Fixed(a) => a,
            AlphaConfig::LCurve { l_curve } => {
                let z = add_noise(&reference.z, &NoiseSpec { tau, seed });
                let (_, res) = select_alpha(&prep, &reference, &l_curve, &z)?;
                alpha_source = "l-curve per tau on the first repeat".into();
                if res.degenerate {
                    notices.push(format!("tau {tau}: l-curve degenerate, minimum-residual alpha used"));
                }
                res.alpha
            }
        };
        alphas.push(alpha);
        let id = Identifier::new(&prep.rom, identifier_config(&prep, params, alpha)).context("stage identification")?;
        let runs: Vec<Result<(f64, f64, f64)>> = parallel_map(cfg.repeats, |r| {
            let z = add_noise(&reference.z, &NoiseSpec { tau, seed: repeat_seed(seed, r) });
            let run = id.run(Some(&reference.s0), &z)?;
            let (e, _) = score(PROPOSED, "force", &prep.force_names, &run.forces, &reference.forces)?;
            ensure!(!e.is_empty(), "reference forces are identically zero");
            Ok((mean(e.iter().map(|x| x.mag)), mean(e.iter().map(|x| x.phase)), mean(e.iter().map(|x| x.comp))))
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>>>().with_context(|| format!("stage noise sweep: tau {tau}"))?;
        for (r, (m, p, c)) in runs.iter().enumerate() {
            run_rows.push(vec![fmt_f64(tau), r.to_string(), repeat_seed(seed, r).to_string(), fmt_f64(*m), fmt_f64(*p), fmt_f64(*c)]);
        }
        let comps: Vec<f64> = runs.iter().map(|r| r.2).collect();
        rows.push(SweepRow {
            tau,
            repeats: cfg.repeats,
            mean_mag: mean(runs.iter().map(|r| r.0)),
            mean_phase: mean(runs.iter().map(|r| r.1)),
            mean_comp: mean(comps.iter().copied()),
            stderr_comp: sample_std(&comps) / (comps.len() as f64).sqrt(),
        });
    }
    let mut non_decreasing = true;
    for w in rows.windows(2) {
        let tol = 2.0 * w[0].stderr_comp.hypot(w[1].stderr_comp);
        if w[1].mean_comp.is_nan() || w[1].mean_comp < w[0].mean_comp - tol {
            non_decreasing = false;
            notices.push(format!(
                "mean eps_comp drops from {:e} at tau {} to {:e} at tau {}",
                w[0].mean_comp, w[0].tau, w[1].mean_comp, w[1].tau
            ));
        }
    }
    let max_mean_comp = rows.iter().map(|r| r.mean_comp).fold(f64::NEG_INFINITY, f64::max);

    let path = dir.join("sweep.csv");
    let table: Vec<Vec<String>> = rows
        .iter()
        .zip(&alphas)
        .map(|(r, a)| {
            vec![
                fmt_f64(r.tau),
                fmt_f64(*a),
                r.repeats.to_string(),
                fmt_f64(r.mean_mag),
                fmt_f64(r.mean_phase),
                fmt_f64(r.mean_comp),
                fmt_f64(r.stderr_comp),
            ]
        })
        .collect();
    write_table(&path, &["tau", "alpha", "repeats", "mean_mag", "mean_phase", "mean_comp", "stderr_comp"], &table)?;
    artifacts.push(path);
    let path = dir.join("sweep_runs.csv");
    write_table(&path, &["tau", "repeat", "seed", "mag", "phase", "comp"], &run_rows)?;
    artifacts.push(path);
    let taus_v: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let plot = Plot {
        title: "noise sweep".into(),
        x_label: "tau".into(),
        y_label: "mean eps".into(),
        lines: vec![
            Line::new("eps_comp", taus_v.clone(), rows.iter().map(|r| r.mean_comp).collect()),
            Line::new("eps_mag", taus_v.clone(), rows.iter().map(|r| r.mean_mag).collect()),
            Line::new("eps_phase", taus_v, rows.iter().map(|r| r.mean_phase).collect()),
        ],
        ..Default::default()
    };
    artifacts.extend(emit_plots(&[("plot_sweep".into(), plot)], &dir)?);

    let single_alpha = alphas.windows(2).all(|w| w[0] == w[1]).then(|| alphas[0]);
    let mut report = SweepReport {
        meta: meta(&prep, &reference, f64::NAN, seed, single_alpha, &alpha_source),
        rows,
        non_decreasing,
        max_mean_comp,
        notices,
        artifacts,
    };
    let path = dir.join("report.toml");
    report.artifacts.push(path.clone());
    write_report(&path, &report)?;
    Ok(report)
}

/// Proposed identifier at `proposed_dt` against the filter at each of
/// `akf_dts`, every case on its own reference solved at its own step.
pub fn run_akf_comparison(cfg: &ExperimentConfig, proposed_dt: f64, akf_dts: &[f64]) -> Result<ComparisonReport> {
    ensure!(!akf_dts.is_empty(), "comparison needs at least one filter step");
    for &dt in akf_dts {
        ensure!(
            dt > 0.0 && dt <= proposed_dt * (1.0 + 1e-12),
            "filter step {dt} must be positive and no larger than the proposed step {proposed_dt}"
        );
    }
    let prep = prepare(cfg)?;
    let duration = cfg.akf_duration();
    let noise = cfg.noise.spec();
    let dir = out_dir(cfg)?;
    let nm = cfg.newmark;
    let mut rows = Vec::new();
    let mut notices = Vec::new();

    let params = vaforce_core::NewmarkParams::new(nm.beta, nm.delta, proposed_dt)?;
    let reference = simulate(&prep, params, duration).context("stage forward solve: proposed")?;
    let z = add_noise(&reference.z, &noise);
    let (alpha, alpha_source, _) = alpha_for(cfg, &prep, &reference, &z)?;
    let est = identify_proposed(&prep, &reference, alpha, &z).context("stage identification: proposed")?;
    let (e, _) = score(PROPOSED, "force", &prep.force_names, &est.forces, &reference.forces)?;
    ensure!(!e.is_empty(), "reference forces are identically zero");
    let row = |method: &str, dt: f64, e: &[ChannelError], wall: f64| ComparisonRow {
        method: method.into(),
        dt,
        mean_mag: mean(e.iter().map(|x| x.mag)),
        mean_phase: mean(e.iter().map(|x| x.phase)),
        mean_comp: mean(e.iter().map(|x| x.comp)),
        wall_time_s: wall,
    };
    rows.push(row(PROPOSED, proposed_dt, &e, est.wall_time_s));

    let mut dts = akf_dts.to_vec();
    dts.sort_by(|a, b| b.total_cmp(a));
    for &dt in &dts {
        let p = vaforce_core::NewmarkParams::new(nm.beta, nm.delta, dt)?;
        let r = simulate(&prep, p, duration).with_context(|| format!("stage forward solve: akf dt {dt}"))?;
        let z = add_noise(&r.z, &noise);
        let est = identify_akf(&prep, &cfg.akf, noise.tau, &r, &z).with_context(|| format!("stage identification: akf dt {dt}"))?;
        let (e, _) = score(AKF, "force", &prep.force_names, &est.forces, &r.forces)?;
        rows.push(row(AKF, dt, &e, est.wall_time_s));
    }

    let akf_rows: Vec<&ComparisonRow> = rows.iter().filter(|r| r.method == AKF).collect();
    let skip = akf_rows.len() == 1 && (akf_rows[0].dt - proposed_dt).abs() <= 1e-12 * proposed_dt;
    let (mut akf_monotone, mut accurate, mut faster) = (None, None, None);
    if skip {
        notices.push("single filter step equal to the proposed step: trend checks skipped".into());
    } else {
        let prop = &rows[0];
        let best = akf_rows.iter().map(|r| r.mean_comp).fold(f64::INFINITY, f64::min);
        let smallest = akf_rows.last().expect("at least one filter row");
        akf_monotone = Some(akf_rows.windows(2).all(|w| w[1].mean_comp <= w[0].mean_comp));
        accurate = Some(prop.mean_comp <= best);
        faster = Some(prop.wall_time_s < smallest.wall_time_s);
        if akf_monotone == Some(false) {
            notices.push("filter error does not decrease monotonically as its step shrinks".into());
        }
        if accurate == Some(false) {
            notices.push(format!("proposed eps_comp {:e} exceeds the filter's best {:e}", prop.mean_comp, best));
        }
        if faster == Some(false) {
            notices.push(format!(
                "proposed wall time {:e} s is not below the filter's {:e} s at dt {}",
                prop.wall_time_s, smallest.wall_time_s, smallest.dt
            ));
        }
    }

    let mut artifacts = Vec::new();
    let path = dir.join("comparison.csv");
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                fmt_f64(r.dt),
                fmt_f64(r.mean_mag),
                fmt_f64(r.mean_phase),
                fmt_f64(r.mean_comp),
                fmt_f64(r.wall_time_s),
            ]
        })
        .collect();
    write_table(&path, &["method", "dt", "mean_mag", "mean_phase", "mean_comp", "wall_time_s"], &table)?;
    artifacts.push(path);
    let plot = Plot {
        title: "error against time step".into(),
        x_label: "dt [s]".into(),
        y_label: "mean eps_comp".into(),
        lines: vec![
            Line::new(AKF, akf_rows.iter().map(|r| r.dt).collect(), akf_rows.iter().map(|r| r.mean_comp).collect()),
            Line::new(PROPOSED, vec![proposed_dt], vec![rows[0].mean_comp]),
        ],
        log_x: true,
        log_y: true,
    };
    artifacts.extend(emit_plots(&[("plot_comparison".into(), plot)], &dir)?);

    let mut report = ComparisonReport {
        meta: meta(&prep, &reference, noise.tau, noise.seed, Some(alpha), &alpha_source),
        rows,
        akf_monotone,
        proposed_at_least_as_accurate: accurate,
        proposed_faster: faster,
        notices,
        artifacts,
    };
    let path = dir.join("report.toml");
    report.artifacts.push(path.clone());
    write_report(&path, &report)?;
    Ok(report)
}

/// Compares the lowest third of the reduced spectrum with the full pencil.
pub fn validate_model(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    let prep = prepare(cfg)?;
    let full = prep.sys.assemble()?;
    let k = (prep.rom.n_reduced() / 3).max(1);
    let errors = eigenvalue_error(&full, &prep.rom, k).context("stage validation: eigenvalues")?;
    let full_vals = nonzero_spectrum(&full.a, &full.b)?;
    let red_vals = nonzero_spectrum(&prep.rom.a_hat, &prep.rom.b_hat)?;
    let rows: Vec<EigenRow> = errors
        .iter()
        .enumerate()
        .map(|(i, &e)| EigenRow {
            mode: i + 1,
            full: full_vals[i],
            reduced: red_vals[i],
            rel_error: e,
        })
        .collect();
    let dir = out_dir(cfg)?;
    let path = dir.join("eigen_errors.csv");
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.mode.to_string(), fmt_f64(r.full), fmt_f64(r.reduced), fmt_f64(r.rel_error)])
        .collect();
    write_table(&path, &["mode", "full", "reduced", "rel_error"], &table)?;
    let mut artifacts = vec![path];
    let modes: Vec<f64> = rows.iter().map(|r| r.mode as f64).collect();
    let plot = Plot {
        title: "reduced eigenvalue error".into(),
        x_label: "mode".into(),
        y_label: "relative error".into(),
        lines: vec![Line::new("rel_error", modes, errors.clone())],
        log_y: true,
        ..Default::default()
    };
    artifacts.extend(emit_plots(&[("plot_eigen_errors".into(), plot)], &dir)?);
    let mut report = ValidationReport {
        n_dof: prep.sys.n_dof(),
        n_reduced: prep.rom.n_reduced(),
        checked_modes: k,
        max_rel_error: errors.iter().copied().fold(0.0, f64::max),
        rows,
        artifacts,
    };
    let path = dir.join("report.toml");
    report.artifacts.push(path.clone());
    write_report(&path, &report)?;
    Ok(report)
}

/// L-curve over the configured grid, with the force error of every grid
/// value against the clean reference for comparison.
pub fn l_curve(cfg: &ExperimentConfig) -> Result<LCurveReport> {
    let AlphaConfig::LCurve { l_curve: lc } = cfg.alpha else {
        bail!("l-curve needs an [alpha.l_curve] section in the config");
    };
    let prep = prepare(cfg)?;
    let params = cfg.newmark.params()?;
    let reference = simulate(&prep, params, cfg.duration).context("stage forward solve")?;
    let noise = cfg.noise.spec();
    let z = add_noise(&reference.z, &noise);
    let (grid, res) = select_alpha(&prep, &reference, &lc, &z)?;
    let n = res.points.len();
    let window_rows = lc.window.unwrap_or(z.nrows()).min(z.nrows());
    let window = z.rows(0, window_rows).into_owned();
    let truth = reference.forces.rows(0, window_rows).into_owned();
    let mut rows = Vec::with_capacity(n);
    for (p, &alpha) in res.points.iter().zip(&grid) {
        let id = Identifier::new(&prep.rom, identifier_config(&prep, params, alpha))?;
        let run = id.run(Some(&reference.s0), &window)?;
        let (e, _) = score(PROPOSED, "force", &prep.force_names, &run.forces, &truth)?;
        rows.push(LCurveRow {
            alpha,
            residual_norm: p.residual_norm,
            solution_norm: p.solution_norm,
            curvature: p.curvature,
            mean_comp: mean(e.iter().map(|x| x.comp)),
        });
    }
    let best_alpha = rows
        .iter()
        .min_by(|a, b| a.mean_comp.total_cmp(&b.mean_comp))
        .map_or(f64::NAN, |r| r.alpha);
    let dir = out_dir(cfg)?;
    let path = dir.join("l_curve.csv");
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.alpha),
                fmt_f64(r.residual_norm),
                fmt_f64(r.solution_norm),
                fmt_f64(r.curvature),
                fmt_f64(r.mean_comp),
            ]
        })
        .collect();
    write_table(&path, &["alpha", "residual_norm", "solution_norm", "curvature", "mean_comp"], &table)?;
    let mut artifacts = vec![path];
    let plot = Plot {
        title: "L-curve".into(),
        x_label: "residual norm".into(),
        y_label: "force norm".into(),
        lines: vec![Line::new(
            "l-curve",
            rows.iter().map(|r| r.residual_norm).collect(),
            rows.iter().map(|r| r.solution_norm).collect(),
        )],
        log_x: true,
        log_y: true,
    };
    artifacts.extend(emit_plots(&[("plot_l_curve".into(), plot)], &dir)?);
    let source = if res.degenerate { "l-curve (degenerate, minimum residual)" } else { "l-curve" };
    let mut report = LCurveReport {
        meta: meta(&prep, &reference, noise.tau, noise.seed, Some(res.alpha), source),
        alpha: res.alpha,
        degenerate: res.degenerate,
        best_alpha,
        rows,
        artifacts,
    };
    let path = dir.join("report.toml");
    report.artifacts.push(path.clone());
    write_report(&path, &report)?;
    Ok(report)
}

/// Paths relative to `root`, for printing.
pub fn relative_to<'a>(root: &Path, p: &'a Path) -> &'a Path {
    p.strip_prefix(root).unwrap_or(p)
}
