//! Newmark-β integration of linear second-order systems
//! `M·ẍ + D·ẋ + K·x = F·f(t)`.
//!
//! One step solves `K̂·x_{t+Δt} = F·f_{t+Δt} + r̂_t` with
//! `K̂ = K + M/(βΔt²) + D·δ/(βΔt)` and then updates velocity and
//! acceleration from the Newmark relations.

use alloc::vec::Vec;

use crate::error::{dim, invalid, Result};
use crate::linalg::{check_finite, Factorization, Mat, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewmarkParams {
    pub beta: f64,
    pub delta: f64,
    pub dt: f64,
}

impl NewmarkParams {
    pub fn new(beta: f64, delta: f64, dt: f64) -> Result<Self> {
        let p = Self { beta, delta, dt };
        p.validate()?;
        Ok(p)
    }

    /// Constant average acceleration (β = 1/4, δ = 1/2).
    pub fn average_acceleration(dt: f64) -> Result<Self> {
        Self::new(0.25, 0.5, dt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "time increment must be positive"));
        }
        if !(self.beta > 0.0 && self.beta <= 0.5) {
            return Err(invalid("beta", "must satisfy 0 < beta <= 0.5"));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(invalid("delta", "must satisfy 0 <= delta <= 1"));
        }
        Ok(())
    }

    pub fn is_unconditionally_stable(&self) -> bool {
        let h = 0.5 + self.delta;
        self.delta >= 0.5 && self.beta >= 0.25 * h * h
    }

    /// Integration constants, named after the terms they multiply.
    pub fn coefficients(&self) -> Coefficients {
        let (b, d, dt) = (self.beta, self.delta, self.dt);
        Coefficients {
            mass_d: 1.0 / (b * dt * dt),
            mass_v: 1.0 / (b * dt),
            mass_a: 0.5 / b - 1.0,
            damp_d: d / (b * dt),
            damp_v: d / b - 1.0,
            damp_a: d * dt / (2.0 * b) - dt,
        }
    }
}

/// `a_*` multiply `Â` in `r̂`, `d_*` multiply `D̂`. Also reused by the
/// velocity/acceleration updates: `ẍ_{t+Δt} = mass_d·Δx − mass_v·ẋ − mass_a·ẍ`
/// and `ẋ_{t+Δt} = damp_d·Δx − damp_v·ẋ − damp_a·ẍ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub mass_d: f64,
    pub mass_v: f64,
    pub mass_a: f64,
    pub damp_d: f64,
    pub damp_v: f64,
    pub damp_a: f64,
}

/// Response, first and second time derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub d: Vector,
    pub v: Vector,
    pub a: Vector,
}

impl State {
    pub fn zeros(n: usize) -> Self {
        Self {
            d: Vector::zeros(n),
            v: Vector::zeros(n),
            a: Vector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            d: &self.d * s,
            v: &self.v * s,
            a: &self.a * s,
        }
    }

    /// Stacks `[d; v; a]`.
    pub fn stacked(&self) -> Vector {
        let n = self.len();
        let mut out = Vector::zeros(3 * n);
        out.rows_mut(0, n).copy_from(&self.d);
        out.rows_mut(n, n).copy_from(&self.v);
        out.rows_mut(2 * n, n).copy_from(&self.a);
        out
    }

    pub fn from_stacked(x: &Vector) -> Self {
        let n = x.len() / 3;
        Self {
            d: x.rows(0, n).into_owned(),
            v: x.rows(n, n).into_owned(),
            a: x.rows(2 * n, n).into_owned(),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.d.len() != n || self.v.len() != n || self.a.len() != n {
            return Err(dim("state", n, self.d.len()));
        }
        check_finite("state", self.d.as_slice())?;
        check_finite("state", self.v.as_slice())?;
        check_finite("state", self.a.as_slice())
    }
}

/// Linear second-order system with an input operator mapping force
/// channels to equations.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderSystem {
    pub mass: Mat,
    pub damping: Mat,
    pub stiffness: Mat,
    pub input: Mat,
}

impl SecondOrderSystem {
    pub fn new(mass: Mat, damping: Mat, stiffness: Mat, input: Mat) -> Result<Self> {
        let n = mass.nrows();
        for (name, m) in [("mass", &mass), ("damping", &damping), ("stiffness", &stiffness)] {
            if m.shape() != (n, n) {
                return Err(dim(name, alloc::format!("{n}x{n}"), alloc::format!("{}x{}", m.nrows(), m.ncols())));
            }
        }
        if input.nrows() != n {
            return Err(dim("input operator rows", n, input.nrows()));
        }
        Ok(Self {
            mass,
            damping,
            stiffness,
            input,
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.input.ncols()
    }

    /// `M·ẍ + D·ẋ + K·x − F·f`.
    pub fn residual(&self, s: &State, f: &Vector) -> Vector {
        &self.mass * &s.a + &self.damping * &s.v + &self.stiffness * &s.d - &self.input * f
    }
}

/// `K̂` and its factorization.
#[derive(Debug, Clone)]
pub struct EffectiveStiffness {
    pub matrix: Mat,
    pub factor: Factorization,
}

pub fn effective_stiffness(
    mass: &Mat,
    damping: &Mat,
    stiffness: &Mat,
    p: &NewmarkParams,
) -> Result<EffectiveStiffness> {
    p.validate()?;
    let n = mass.nrows();
    if damping.shape() != (n, n) || stiffness.shape() != (n, n) {
        return Err(dim("Newmark matrices", alloc::format!("{n}x{n}"), "mismatched shapes"));
    }
    let c = p.coefficients();
    let matrix = stiffness + mass * c.mass_d + damping * c.damp_d;
    let factor = Factorization::new(
        "effective stiffness",
        &matrix,
        "rigid-body mode without a mass or damping path",
    )?;
    Ok(EffectiveStiffness { matrix, factor })
}

/// `r̂ = M·(d/(βΔt²) + v/(βΔt) + (1/(2β)−1)·a) + D·(δ/(βΔt)·d + (δ/β−1)·v + (δΔt/(2β)−Δt)·a)`.
pub fn internal_force(mass: &Mat, damping: &Mat, s: &State, p: &NewmarkParams) -> Vector {
    let c = p.coefficients();
    let inertial = &s.d * c.mass_d + &s.v * c.mass_v + &s.a * c.mass_a;
    let viscous = &s.d * c.damp_d + &s.v * c.damp_v + &s.a * c.damp_a;
    mass * inertial + damping * viscous
}

/// Velocity and acceleration at `t+Δt` from the new response and the old
/// state.
pub fn update_derivatives(d_next: Vector, s: &State, p: &NewmarkParams) -> State {
    let c = p.coefficients();
    let delta = &d_next - &s.d;
    let a = &delta * c.mass_d - &s.v * c.mass_v - &s.a * c.mass_a;
    let v = &delta * c.damp_d - &s.v * c.damp_v - &s.a * c.damp_a;
    State { d: d_next, v, a }
}

/// Newmark integrator bound to one system and one time increment; building a
/// new one is the only way to change `Δt`.
#[derive(Debug, Clone)]
pub struct Integrator {
    system: SecondOrderSystem,
    params: NewmarkParams,
    k_eff: EffectiveStiffness,
}

impl Integrator {
    pub fn new(system: SecondOrderSystem, params: NewmarkParams) -> Result<Self> {
        let k_eff = effective_stiffness(&system.mass, &system.damping, &system.stiffness, &params)?;
        Ok(Self {
            system,
            params,
            k_eff,
        })
    }

    pub fn system(&self) -> &SecondOrderSystem {
        &self.system
    }

    pub fn params(&self) -> &NewmarkParams {
        &self.params
    }

    pub fn effective_stiffness(&self) -> &EffectiveStiffness {
        &self.k_eff
    }

    /// Advances `s` by one step under the force `f_next` applied at `t+Δt`.
    pub fn step(&self, s: &State, f_next: &Vector) -> Result<State> {
        s.check(self.system.dim())?;
        if f_next.len() != self.system.n_inputs() {
            return Err(dim("force vector", self.system.n_inputs(), f_next.len()));
        }
        check_finite("force vector", f_next.as_slice())?;
        let mut rhs = internal_force(&self.system.mass, &self.system.damping, s, &self.params);
        rhs += &self.system.input * f_next;
        self.k_eff.factor.solve_in_place(&mut rhs);
        Ok(update_derivatives(rhs, s, &self.params))
    }

    /// Acceleration consistent with the equation of motion at `t`.
    pub fn consistent_acceleration(&self, d: &Vector, v: &Vector, f: &Vector) -> Result<Vector> {
        let m = Factorization::new("mass", &self.system.mass, "mass matrix must be invertible")?;
        let rhs = &self.system.input * f - &self.system.damping * v - &self.system.stiffness * d;
        Ok(m.solve(&rhs))
    }

    /// Integrates from `(d0, v0)` through a force series whose row `k` is
    /// sampled at `t = k·Δt`. The initial acceleration is `a0` when given,
    /// otherwise it is solved from the equation of motion at `t = 0`.
    ///
    /// Returns one state per row of `forces`.
    pub fn integrate(&self, d0: &Vector, v0: &Vector, a0: Option<&Vector>, forces: &Mat) -> Result<Vec<State>> {
        let n = self.system.dim();
        if forces.ncols() != self.system.n_inputs() {
            return Err(dim("force series columns", self.system.n_inputs(), forces.ncols()));
        }
        if forces.nrows() == 0 {
            return Err(invalid("force series", "must contain at least the t = 0 sample"));
        }
        if d0.len() != n || v0.len() != n {
            return Err(dim("initial state", n, d0.len()));
        }
        let f0 = forces.row(0).transpose();
        let a = match a0 {
            Some(a) => a.clone(),
            None => self.consistent_acceleration(d0, v0, &f0)?,
        };
        let mut states = Vec::with_capacity(forces.nrows());
        states.push(State {
            d: d0.clone(),
            v: v0.clone(),
            a,
        });
        for k in 1..forces.nrows() {
            let f = forces.row(k).transpose();
            let next = self.step(&states[k - 1], &f)?;
            states.push(next);
        }
        Ok(states)
    }
}
