//! Augmented Kalman filter on the reduced model, used as the comparison
//! baseline.
//!
//! The reduced dynamics are cast in first-order form, discretized with a
//! zero-order hold and augmented with the unknown force modelled as a random
//! walk. Accelerations enter the measurement equation through the equation
//! of motion, which gives the direct feedthrough block of `Ga`.
//!
//! Structural and acoustic coordinates differ by many orders of magnitude,
//! so the filter runs on a balanced state `x = diag(scale)·x̃`. Priors,
//! noise covariances and results are exchanged in the original coordinates.

use alloc::vec::Vec;

use nalgebra::Cholesky;

use crate::error::{dim, invalid, Error, Result};
use crate::linalg::{balance, check_finite, expm, symmetrize, Factorization, Mat, Vector};
use crate::rom::ReducedModel;
use crate::system::{selection_matrix, SelectionConfig};

/// Continuous model `ẋ = Ac·x + Bc·f` with `x = [d̂; d̂̇]`, stored in
/// balanced form: `ac = S⁻¹·Ac·S`, `bc = S⁻¹·Bc`, `S = diag(scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub ac: Mat,
    pub bc: Mat,
    pub scale: Vector,
}

impl StateSpaceModel {
    /// Wraps an unscaled pair.
    pub fn unscaled(ac: Mat, bc: Mat) -> Self {
        let scale = Vector::from_element(ac.nrows(), 1.0);
        Self { ac, bc, scale }
    }
}

/// `Ac = [[0, I], [−Â⁻¹B̂, −Â⁻¹D̂]]`, `Bc = [0; Â⁻¹·Tᵀ·S_f]`, balanced.
pub fn build_state_space(rom: &ReducedModel, force_idx: &[usize]) -> Result<StateSpaceModel> {
    let m = rom.n_reduced();
    let a_inv = Factorization::new("reduced mass", &rom.a_hat, "reduced mass must be invertible")?;
    let mut ac = Mat::zeros(2 * m, 2 * m);
    ac.view_mut((0, m), (m, m)).copy_from(&Mat::identity(m, m));
    ac.view_mut((m, 0), (m, m)).copy_from(&-a_inv.solve_matrix(&rom.b_hat));
    ac.view_mut((m, m), (m, m)).copy_from(&-a_inv.solve_matrix(&rom.d_hat));
    let nf = force_idx.len();
    let mut bc = Mat::zeros(2 * m, nf);
    bc.view_mut((m, 0), (m, nf))
        .copy_from(&a_inv.solve_matrix(&rom.force_operator(force_idx)));
    let (scale, ac) = balance(&ac);
    for (i, mut row) in bc.row_iter_mut().enumerate() {
        row /= scale[i];
    }
    Ok(StateSpaceModel { ac, bc, scale })
}

/// Zero-order-hold discretization through the block exponential
/// `exp([[Ac, Bc], [0, 0]]·Δt) = [[Ad, Bd], [0, I]]`, valid for singular `Ac`.
/// The result is in the coordinates of `ssm`.
pub fn discretize(ssm: &StateSpaceModel, dt: f64) -> Result<(Mat, Mat)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", "time increment must be positive"));
    }
    let n = ssm.ac.nrows();
    let nf = ssm.bc.ncols();
    if ssm.bc.nrows() != n {
        return Err(dim("Bc rows", n, ssm.bc.nrows()));
    }
    let mut block = Mat::zeros(n + nf, n + nf);
    block.view_mut((0, 0), (n, n)).copy_from(&(&ssm.ac * dt));
    block.view_mut((0, n), (n, nf)).copy_from(&(&ssm.bc * dt));
    let e = expm(&block)?;
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, nf)).into_owned(),
    ))
}

/// Discrete augmented model `x̃⁺ = Aa·x̃ + ζ`, `z = Ga·x̃ + v` in balanced
/// coordinates `x = diag(scale)·x̃`; the force entries of `scale` are 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedModel {
    pub aa: Mat,
    pub ga: Mat,
    pub q: Mat,
    pub r: Mat,
    pub n_forces: usize,
    pub scale: Vector,
}

impl AugmentedModel {
    pub fn dim(&self) -> usize {
        self.aa.nrows()
    }

    pub fn n_state(&self) -> usize {
        self.dim() - self.n_forces
    }

    /// Maps a filter state from original to balanced coordinates.
    pub fn to_balanced(&self, fs: &FilterState) -> FilterState {
        let s = &self.scale;
        FilterState {
            x: fs.x.component_div(s),
            p: Mat::from_fn(s.len(), s.len(), |i, j| fs.p[(i, j)] / (s[i] * s[j])),
        }
    }

    /// Maps a filter state from balanced back to original coordinates.
    pub fn to_original(&self, fs: &FilterState) -> FilterState {
        let s = &self.scale;
        FilterState {
            x: fs.x.component_mul(s),
            p: Mat::from_fn(s.len(), s.len(), |i, j| fs.p[(i, j)] * s[i] * s[j]),
        }
    }
}

/// Measurement matrix for `x = [d̂; d̂̇; f]` with rows in the
/// displacement / velocity / acceleration order of `sel`:
///
/// ```text
/// Ga = [ S_d·T − S_a·T·Â⁻¹B̂ | S_v·T − S_a·T·Â⁻¹D̂ | S_a·T·Â⁻¹·Tᵀ·S_f ]
/// ```
///
/// where each `S_*` is padded with zero rows to the full measurement count.
pub fn measurement_matrix(rom: &ReducedModel, sel: &SelectionConfig) -> Result<Mat> {
    let n = rom.n_dof();
    sel.validate(n)?;
    let m = rom.n_reduced();
    let nf = sel.n_forces();
    let nz = sel.n_measurements();
    let a_inv = Factorization::new("reduced mass", &rom.a_hat, "reduced mass must be invertible")?;
    let (nd, nv) = (sel.disp_idx.len(), sel.vel_idx.len());
    let mut ga = Mat::zeros(nz, 2 * m + nf);
    ga.view_mut((0, 0), (nd, m))
        .copy_from(&(selection_matrix(&sel.disp_idx, n) * &rom.t));
    ga.view_mut((nd, m), (nv, m))
        .copy_from(&(selection_matrix(&sel.vel_idx, n) * &rom.t));
    let sat = selection_matrix(&sel.acc_idx, n) * &rom.t;
    let na = sel.acc_idx.len();
    let row = nd + nv;
    ga.view_mut((row, 0), (na, m))
        .copy_from(&-(&sat * a_inv.solve_matrix(&rom.b_hat)));
    ga.view_mut((row, m), (na, m))
        .copy_from(&-(&sat * a_inv.solve_matrix(&rom.d_hat)));
    ga.view_mut((row, 2 * m), (na, nf))
        .copy_from(&(&sat * a_inv.solve_matrix(&rom.force_operator(&sel.force_idx))));
    Ok(ga)
}

fn check_covariance(name: &str, m: &Mat, n: usize, definite: bool) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(dim(name, alloc::format!("{n}x{n}"), alloc::format!("{}x{}", m.nrows(), m.ncols())));
    }
    crate::linalg::check_symmetric(name, m, 1e-10)?;
    let min = crate::linalg::min_symmetric_eigenvalue(m);
    let scale = m.amax();
    let ok = if definite {
        min > 0.0
    } else {
        min >= -1e-12 * scale
    };
    if !ok {
        return Err(Error::NotPositiveDefinite {
            name: alloc::string::ToString::to_string(name),
        });
    }
    Ok(())
}

/// Discretizes `ssm` with step `dt` and builds `Aa = [[Ad, Bd], [0, I]]`
/// together with `Ga`. `q` (augmented state) and `r` are given in the
/// original coordinates.
pub fn augment(
    ssm: &StateSpaceModel,
    dt: f64,
    rom: &ReducedModel,
    sel: &SelectionConfig,
    q: Mat,
    r: Mat,
) -> Result<AugmentedModel> {
    let n = ssm.ac.nrows();
    let nf = ssm.bc.ncols();
    if n != 2 * rom.n_reduced() {
        return Err(dim("state-space dimension", 2 * rom.n_reduced(), n));
    }
    if nf != sel.n_forces() {
        return Err(dim("force count", sel.n_forces(), nf));
    }
    let (ad, bd) = discretize(ssm, dt)?;
    let na = n + nf;
    let mut aa = Mat::zeros(na, na);
    aa.view_mut((0, 0), (n, n)).copy_from(&ad);
    aa.view_mut((0, n), (n, nf)).copy_from(&bd);
    aa.view_mut((n, n), (nf, nf)).copy_from(&Mat::identity(nf, nf));
    let mut scale = Vector::from_element(na, 1.0);
    scale.rows_mut(0, n).copy_from(&ssm.scale);
    let mut ga = measurement_matrix(rom, sel)?;
    for (j, mut col) in ga.column_iter_mut().enumerate() {
        col *= scale[j];
    }
    check_covariance("Q", &q, na, false)?;
    check_covariance("R", &r, sel.n_measurements(), true)?;
    let q = Mat::from_fn(na, na, |i, j| q[(i, j)] / (scale[i] * scale[j]));
    Ok(AugmentedModel {
        aa,
        ga,
        q,
        r,
        n_forces: nf,
        scale,
    })
}

/// Process noise with a tiny state block and a force block `q_force·I`.
pub fn default_process_noise(n_state: usize, n_forces: usize, q_state: f64, q_force: f64) -> Mat {
    let mut d = Vector::from_element(n_state + n_forces, q_state);
    d.rows_mut(n_state, n_forces).fill(q_force);
    Mat::from_diagonal(&d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x: Vector,
    pub p: Mat,
}

impl FilterState {
    pub fn new(x: Vector, p: Mat) -> Self {
        Self { x, p }
    }

    pub fn zeros(n: usize, p0: Mat) -> Self {
        Self {
            x: Vector::zeros(n),
            p: p0,
        }
    }
}

/// `L = P·Gaᵀ·(Ga·P·Gaᵀ + R)⁻¹`, `x ← x + L·(z − Ga·x)`, with the
/// covariance in Joseph form `P ← (I − L·Ga)·P·(I − L·Ga)ᵀ + L·R·Lᵀ`.
pub fn measurement_update(m: &AugmentedModel, fs: &FilterState, z: &Vector) -> Result<FilterState> {
    if z.len() != m.ga.nrows() {
        return Err(dim("measurement vector", m.ga.nrows(), z.len()));
    }
    check_finite("measurement", z.as_slice())?;
    let pg = &fs.p * m.ga.transpose();
    let s = symmetrize(&(&m.ga * &pg + &m.r));
    let chol = Cholesky::new(s).ok_or_else(|| Error::NotPositiveDefinite {
        name: alloc::string::ToString::to_string("innovation covariance"),
    })?;
    // L = P Gaᵀ S⁻¹  ⇔  S Lᵀ = Ga P
    let gain = chol.solve(&pg.transpose()).transpose();
    let innovation = z - &m.ga * &fs.x;
    let x = &fs.x + &gain * innovation;
    let n = fs.p.nrows();
    let ikg = Mat::identity(n, n) - &gain * &m.ga;
    let p = symmetrize(&(&ikg * &fs.p * ikg.transpose() + &gain * &m.r * gain.transpose()));
    Ok(FilterState { x, p })
}

/// `x ← Aa·x`, `P ← Aa·P·Aaᵀ + Q`.
pub fn time_update(m: &AugmentedModel, fs: &FilterState) -> FilterState {
    let x = &m.aa * &fs.x;
    let p = symmetrize(&(&m.aa * &fs.p * m.aa.transpose() + &m.q));
    FilterState { x, p }
}

#[derive(Debug, Clone)]
pub struct FilterRun {
    /// Filtered force estimate per measurement row.
    pub forces: Mat,
    /// Filtered `[d̂; d̂̇]` per measurement row.
    pub states: Vec<Vector>,
    pub final_state: FilterState,
}

/// Alternates measurement and time updates over the rows of
/// `measurements`; `fs0` is the prior for the first row, in original
/// coordinates. Outputs are in original coordinates.
pub fn run_filter(m: &AugmentedModel, fs0: &FilterState, measurements: &Mat) -> Result<FilterRun> {
    let n = m.dim();
    let nf = m.n_forces;
    let n_state = m.n_state();
    if fs0.x.len() != n || fs0.p.shape() != (n, n) {
        return Err(dim("filter state", n, fs0.x.len()));
    }
    let mut forces = Mat::zeros(measurements.nrows(), nf);
    let mut states = Vec::with_capacity(measurements.nrows());
    let mut fs = m.to_balanced(fs0);
    let state_scale = m.scale.rows(0, n_state);
    for k in 0..measurements.nrows() {
        let z = measurements.row(k).transpose();
        let filtered = measurement_update(m, &fs, &z)?;
        forces.set_row(k, &filtered.x.rows(n_state, nf).transpose());
        states.push(filtered.x.rows(0, n_state).component_mul(&state_scale));
        fs = time_update(m, &filtered);
    }
    Ok(FilterRun {
        forces,
        states,
        final_state: m.to_original(&fs),
    })
}
