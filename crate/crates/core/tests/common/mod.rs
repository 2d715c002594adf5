#![allow(dead_code)]

use vaforce_core::excitation::{benchmark_profiles, sample_profiles};
use vaforce_core::identify::recover_physical;
use vaforce_core::metrics::assemble_measurement_vector;
use vaforce_core::newmark::Integrator;
use vaforce_core::{
    generate_toy, reduce, CoupledSystem, DampingSpec, Mat, NewmarkParams, ReducedModel, RomSpec,
    SelectionConfig, State, ToyModelSpec, Vector,
};

/// Soft rod on a water column: the forcing bands sit well above the first
/// structural resonances, where accelerations carry the force information.
pub fn soft_spec(n_elems: usize) -> ToyModelSpec {
    ToyModelSpec {
        n_struct_elems: n_elems,
        n_fluid_elems: n_elems,
        youngs_modulus: 2.1e5,
        ..Default::default()
    }
}

pub fn toy(n_elems: usize) -> CoupledSystem {
    generate_toy(&soft_spec(n_elems)).unwrap()
}

pub fn damping() -> DampingSpec {
    DampingSpec {
        a1s: 1.0,
        a2s: 1e-6,
        a1f: 1.0,
        a2f: 1e-6,
    }
}

/// Four forces and six acceleration sensors along a 20-element rod, four
/// of them collocated with the forces.
pub fn selection() -> SelectionConfig {
    SelectionConfig {
        acc_idx: vec![2, 4, 8, 12, 14, 18],
        force_idx: vec![4, 8, 14, 18],
        ..Default::default()
    }
}

pub struct Scenario {
    pub rom: ReducedModel,
    pub sel: SelectionConfig,
    pub params: NewmarkParams,
    /// Row `k` at `t = k·Δt`, `k = 0..=steps`.
    pub forces: Mat,
    /// Reduced states aligned with `forces`.
    pub states: Vec<State>,
    /// Measurements for `t_1..t_steps`.
    pub z: Mat,
}

pub fn scenario(modes: usize, dt: f64, steps: usize) -> Scenario {
    let sys = toy(20);
    let rom = reduce(&sys, &RomSpec::new(modes, modes), &damping()).unwrap();
    let sel = selection();
    let params = NewmarkParams::average_acceleration(dt).unwrap();
    let forces = sample_profiles(&benchmark_profiles(), dt, steps);
    let integ = Integrator::new(rom.second_order(&sel.force_idx).unwrap(), params).unwrap();
    let m = rom.n_reduced();
    let states = integ
        .integrate(&Vector::zeros(m), &Vector::zeros(m), None, &forces)
        .unwrap();
    let phys: Vec<State> = states[1..].iter().map(|s| recover_physical(&rom, s)).collect();
    let z = assemble_measurement_vector(&phys, &sel).unwrap();
    Scenario {
        rom,
        sel,
        params,
        forces,
        states,
        z,
    }
}

pub fn max_relative_error(identified: &Mat, reference: &Mat) -> f64 {
    (identified - reference).amax() / reference.amax()
}
