//! Implicit, Tikhonov-regularized force identification on a reduced model.
//!
//! Per time step the Newmark recursion is written as an affine map from the
//! unknown force to the next reduced state,
//!
//! ```text
//! [d̂; d̂̇; d̂̈]_{t+Δt} = G·f + g_t
//! ```
//!
//! where `G` stacks `H·Tᵀ·S_f` scaled by `1`, `δ/(βΔt)` and `1/(βΔt²)`
//! (`H = K̂⁻¹`), and `g_t` is the free response driven by the previous state.
//! The measurement prediction is `Ŝ·(G·f + g)`; minimizing
//! `‖z_m − Ŝ(G·f + g)‖² + α‖f‖²` gives
//!
//! ```text
//! f = (GᵀŜᵀŜG + αI)⁻¹·GᵀŜᵀ·(z_m − Ŝ·g) = P·(z_m − Ŝ·g).
//! ```
//!
//! Everything except `g` is step-invariant and precomputed once.

use alloc::vec::Vec;

use nalgebra::{Cholesky, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{dim, invalid, Error, Result};
use crate::linalg::{balance, check_finite, symmetrize, Mat, Vector};
use crate::newmark::{effective_stiffness, internal_force, update_derivatives, NewmarkParams, State};
use crate::rom::ReducedModel;
use crate::system::{selection_matrix, SelectionConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifierConfig {
    pub newmark: NewmarkParams,
    /// Tikhonov parameter α, constant over a run.
    pub alpha: f64,
    pub selection: SelectionConfig,
}

impl IdentifierConfig {
    pub fn validate(&self, n_dof: usize) -> Result<()> {
        self.newmark.validate()?;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", "must be finite and non-negative"));
        }
        self.selection.validate(n_dof)?;
        if self.selection.n_forces() == 0 {
            return Err(invalid("force_idx", "at least one force is required"));
        }
        if self.alpha == 0.0 {
            self.selection.check_identifiable()?;
        }
        Ok(())
    }
}

/// Step-invariant operators.
#[derive(Debug, Clone)]
pub struct Gain {
    /// Factorized `K̂`; applying its solve is applying `H`.
    pub h: crate::linalg::Factorization,
    /// `3m × n_forces` response sensitivity.
    pub g: Mat,
    /// `n_z × 3m` reduced selection operator.
    pub s_hat: Mat,
    /// `n_forces × n_z` regularized pseudo-inverse.
    pub p: Mat,
    /// `Ŝ·G`, kept for diagnostics and the gradient check.
    pub sg: Mat,
}

/// Quantities computed inside one identification step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepWork {
    pub rhat: Vector,
    /// Stacked free response, length `3m`.
    pub g: Vector,
    pub force: Vector,
    pub state: State,
}

/// Builds `Ŝ = blockdiag(S_d·T, S_v·T, S_a·T)`.
pub fn reduced_selection(t: &Mat, sel: &SelectionConfig) -> Mat {
    let (n, m) = t.shape();
    let nz = sel.n_measurements();
    let mut s_hat = Mat::zeros(nz, 3 * m);
    let mut row = 0;
    for (block, idx) in [&sel.disp_idx, &sel.vel_idx, &sel.acc_idx].into_iter().enumerate() {
        let st = selection_matrix(idx, n) * t;
        s_hat.view_mut((row, block * m), (idx.len(), m)).copy_from(&st);
        row += idx.len();
    }
    s_hat
}

/// Assembles `K̂`, `H`, `G`, `Ŝ` and `P` for a reduced model.
pub fn precompute_gain(rom: &ReducedModel, cfg: &IdentifierConfig) -> Result<Gain> {
    cfg.validate(rom.n_dof())?;
    let m = rom.n_reduced();
    let k_eff = effective_stiffness(&rom.a_hat, &rom.d_hat, &rom.b_hat, &cfg.newmark)?;
    let c = cfg.newmark.coefficients();
    let hf = k_eff.factor.solve_matrix(&rom.force_operator(&cfg.selection.force_idx));
    let nf = hf.ncols();
    let mut g = Mat::zeros(3 * m, nf);
    g.view_mut((0, 0), (m, nf)).copy_from(&hf);
    g.view_mut((m, 0), (m, nf)).copy_from(&(&hf * c.damp_d));
    g.view_mut((2 * m, 0), (m, nf)).copy_from(&(&hf * c.mass_d));

    let s_hat = reduced_selection(&rom.t, &cfg.selection);
    let sg = &s_hat * &g;
    let normal = symmetrize(&(sg.transpose() * &sg)) + Mat::identity(nf, nf) * cfg.alpha;
    let eig = SymmetricEigen::new(normal.clone());
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if ratio.is_nan() || ratio <= (nf as f64) * f64::EPSILON {
        return Err(Error::RankDeficient { ratio });
    }
    let chol = Cholesky::new(normal).ok_or(Error::RankDeficient { ratio })?;
    let p = chol.solve(&sg.transpose());
    Ok(Gain {
        h: k_eff.factor,
        g,
        s_hat,
        p,
        sg,
    })
}

/// Sequential identifier: one gain, one reduced model, one time increment.
#[derive(Debug, Clone)]
pub struct Identifier {
    gain: Gain,
    cfg: IdentifierConfig,
    a_hat: Mat,
    d_hat: Mat,
}

/// Output of [`Identifier::run`]: row `k` of `forces` and `states[k]` belong
/// to measurement row `k`.
#[derive(Debug, Clone)]
pub struct IdentificationRun {
    pub forces: Mat,
    pub states: Vec<State>,
    /// `ẑ = Ŝ·x` per step, rows aligned with the measurements.
    pub predicted: Mat,
}

impl Identifier {
    pub fn new(rom: &ReducedModel, cfg: IdentifierConfig) -> Result<Self> {
        let gain = precompute_gain(rom, &cfg)?;
        Ok(Self {
            gain,
            cfg,
            a_hat: rom.a_hat.clone(),
            d_hat: rom.d_hat.clone(),
        })
    }

    pub fn gain(&self) -> &Gain {
        &self.gain
    }

    pub fn config(&self) -> &IdentifierConfig {
        &self.cfg
    }

    pub fn n_reduced(&self) -> usize {
        self.a_hat.nrows()
    }

    /// Free response `g` and internal force `r̂` for the step leaving `s`.
    pub fn free_response(&self, s: &State) -> (Vector, Vector) {
        let p = &self.cfg.newmark;
        let rhat = internal_force(&self.a_hat, &self.d_hat, s, p);
        let d_free = self.gain.h.solve(&rhat);
        let free = update_derivatives(d_free, s, p);
        (free.stacked(), rhat)
    }

    /// Identifies the force at `t+Δt` from measurement `z` (ordered
    /// displacements, velocities, accelerations) and advances the state.
    pub fn step(&self, s: &State, z: &Vector) -> Result<StepWork> {
        let m = self.n_reduced();
        if s.len() != m || s.v.len() != m || s.a.len() != m {
            return Err(dim("reduced state", m, s.len()));
        }
        if z.len() != self.gain.s_hat.nrows() {
            return Err(dim("measurement vector", self.gain.s_hat.nrows(), z.len()));
        }
        check_finite("measurement", z.as_slice())?;
        let (g, rhat) = self.free_response(s);
        let innovation = z - &self.gain.s_hat * &g;
        let force = &self.gain.p * innovation;
        let state = State::from_stacked(&(&self.gain.g * &force + &g));
        Ok(StepWork {
            rhat,
            g,
            force,
            state,
        })
    }

    /// Runs the recursion over every row of `measurements`, starting from
    /// `s0` (zero state when `None`).
    pub fn run(&self, s0: Option<&State>, measurements: &Mat) -> Result<IdentificationRun> {
        let m = self.n_reduced();
        let nz = self.gain.s_hat.nrows();
        if measurements.ncols() != nz {
            return Err(dim("measurement columns", nz, measurements.ncols()));
        }
        let steps = measurements.nrows();
        let mut state = s0.cloned().unwrap_or_else(|| State::zeros(m));
        let mut forces = Mat::zeros(steps, self.gain.p.nrows());
        let mut predicted = Mat::zeros(steps, nz);
        let mut states = Vec::with_capacity(steps);
        for k in 0..steps {
            let z = measurements.row(k).transpose();
            let work = self.step(&state, &z)?;
            forces.set_row(k, &work.force.transpose());
            predicted.set_row(k, &(&self.gain.s_hat * work.state.stacked()).transpose());
            state = work.state;
            states.push(state.clone());
        }
        Ok(IdentificationRun {
            forces,
            states,
            predicted,
        })
    }
}

impl Identifier {
    /// Propagation matrix of the recursion for errors in the stacked state,
    /// `e⁺ = (I − G·P·Ŝ)·F·e`, where `F` maps a state to its free response.
    pub fn error_propagation(&self) -> Mat {
        let n = 3 * self.n_reduced();
        let mut free = Mat::zeros(n, n);
        let mut unit = Vector::zeros(n);
        for j in 0..n {
            unit[j] = 1.0;
            let (g, _) = self.free_response(&State::from_stacked(&unit));
            free.set_column(j, &g);
            unit[j] = 0.0;
        }
        let projector = Mat::identity(n, n) - &self.gain.g * &self.gain.p * &self.gain.s_hat;
        projector * free
    }

    /// Spectral radius of [`Identifier::error_propagation`]. Values above 1
    /// mean rounding and measurement errors grow from step to step, which
    /// happens when the sensor layout makes the inverse dynamics unstable.
    pub fn spectral_radius(&self) -> f64 {
        let (_, balanced) = balance(&self.error_propagation());
        balanced
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re.hypot(z.im))
            .fold(0.0, f64::max)
    }
}

/// Physical response `T·ŝ` for each of `d`, `ḋ`, `d̈`.
pub fn recover_physical(rom: &ReducedModel, s: &State) -> State {
    State {
        d: &rom.t * &s.d,
        v: &rom.t * &s.v,
        a: &rom.t * &s.a,
    }
}

/// One point of an L-curve sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LCurvePoint {
    pub alpha: f64,
    pub residual_norm: f64,
    pub solution_norm: f64,
    /// Signed discrete curvature in (log ρ, log η); `NaN` at the endpoints
    /// and where neighbouring points coincide.
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LCurveResult {
    pub alpha: f64,
    pub points: Vec<LCurvePoint>,
    /// No interior curvature peak; `alpha` is then the minimum-residual point.
    pub degenerate: bool,
}

/// Neighbouring L-curve points closer than this fraction of the curve's
/// extent are treated as coincident and get no curvature.
pub const COINCIDENT_FRACTION: f64 = 1e-3;

/// Signed Menger curvature of three points; positive for a left turn.
fn menger_curvature(p1: (f64, f64), p2: (f64, f64), p3: (f64, f64)) -> f64 {
    let cross = (p2.0 - p1.0) * (p3.1 - p1.1) - (p2.1 - p1.1) * (p3.0 - p1.0);
    let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    let denom = dist(p1, p2) * dist(p2, p3) * dist(p1, p3);
    if denom > 0.0 {
        2.0 * cross / denom
    } else {
        0.0
    }
}

/// Chooses α by the L-curve corner. For every grid value an identifier is
/// built, run over the calibration `window`, and the pair
/// `(log‖z_m − ẑ‖, log‖f‖)` recorded. The corner is the grid point of
/// maximum positive curvature, ties going to the larger α. If the curvature
/// has no interior peak the minimum-residual point is returned and the
/// result is flagged degenerate.
pub fn l_curve_select_alpha(
    rom: &ReducedModel,
    base: &IdentifierConfig,
    s0: Option<&State>,
    window: &Mat,
    grid: &[f64],
) -> Result<LCurveResult> {
    if grid.is_empty() {
        return Err(invalid("alpha grid", "must not be empty"));
    }
    if grid.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(invalid("alpha grid", "values must be strictly positive"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("alpha grid", "values must be strictly increasing"));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let cfg = IdentifierConfig {
            alpha,
            ..base.clone()
        };
        let run = Identifier::new(rom, cfg)?.run(s0, window)?;
        points.push(LCurvePoint {
            alpha,
            residual_norm: (window - &run.predicted).norm(),
            solution_norm: run.forces.norm(),
            curvature: f64::NAN,
        });
    }
    if points.len() == 1 {
        return Ok(LCurveResult {
            alpha: grid[0],
            points,
            degenerate: false,
        });
    }
    let tiny = f64::MIN_POSITIVE;
    let coords: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.residual_norm.max(tiny).ln(), p.solution_norm.max(tiny).ln()))
        .collect();
    let (lo, hi) = coords.iter().fold(
        ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), &(x, y)| ((lo.0.min(x), lo.1.min(y)), (hi.0.max(x), hi.1.max(y))),
    );
    let min_step = COINCIDENT_FRACTION * (hi.0 - lo.0).hypot(hi.1 - lo.1);
    let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    for i in 1..points.len().saturating_sub(1) {
        let (p, q, r) = (coords[i - 1], coords[i], coords[i + 1]);
        if dist(p, q).min(dist(q, r)) > min_step {
            points[i].curvature = menger_curvature(p, q, r);
        }
    }

    let curvatures: Vec<f64> = points
        .iter()
        .map(|p| p.curvature)
        .filter(|c| !c.is_nan())
        .collect();
    let mut best: Option<usize> = None;
    for i in 1..points.len().saturating_sub(1) {
        let k = points[i].curvature;
        if k > 0.0 && best.is_none_or(|b| k >= points[b].curvature) {
            best = Some(i);
        }
    }
    match best {
        Some(i) if !is_monotone(&curvatures) => Ok(LCurveResult {
            alpha: points[i].alpha,
            points,
            degenerate: false,
        }),
        _ => {
            let mut arg = 0;
            for (i, p) in points.iter().enumerate() {
                if p.residual_norm < points[arg].residual_norm {
                    arg = i;
                }
            }
            Ok(LCurveResult {
                alpha: points[arg].alpha,
                points,
                degenerate: true,
            })
        }
    }
}

/// True when a curvature sequence of three or more values never turns.
fn is_monotone(k: &[f64]) -> bool {
    if k.len() < 3 {
        return false;
    }
    k.windows(2).all(|w| w[1] >= w[0]) || k.windows(2).all(|w| w[1] <= w[0])
}
