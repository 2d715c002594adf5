//! One-dimensional coupled test models: an axial rod (or spring-mass chain)
//! whose tip acts as a piston on an acoustic column.
//!
//! Layout: the structure spans `x ∈ [0, len_struct]` with node 0 at the root
//! and the last node at the piston. Fluid node 0 sits on the piston face and
//! the column extends over `len_fluid`.
//!
//! Fluid convention: pressure unknowns with element matrices
//!
//! ```text
//! Mf_e = (A·Le/6)·[[2,1],[1,2]]      Kf_e = (c²·A/Le)·[[1,-1],[-1,1]]
//! ```
//!
//! so the fluid rows read `ρc²·Cᵀ·ü + Mf·p̈ + Kf·p = 0` and the piston
//! coupling `C` holds a single entry `+area` at (tip DOF, interface node).
//! Boundary conditions are applied by eliminating rows and columns.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::linalg::Mat;
use crate::system::CoupledSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyKind {
    /// Consistent-mass linear rod elements and a consistent acoustic column.
    RodTubePiston,
    /// Lumped masses joined by axial springs, lumped acoustic column.
    SpringMassChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Boundary {
    /// Clamp the structural root (x = 0).
    pub struct_start_fixed: bool,
    /// Clamp the piston end; this removes the coupling DOF.
    pub struct_end_fixed: bool,
    /// Pressure-release (p = 0) far end of the column; otherwise rigid.
    pub fluid_end_open: bool,
}

impl Default for Boundary {
    fn default() -> Self {
        Self {
            struct_start_fixed: true,
            struct_end_fixed: false,
            fluid_end_open: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModelSpec {
    pub kind: ToyKind,
    pub n_struct_elems: usize,
    pub n_fluid_elems: usize,
    /// Young's modulus (Pa).
    pub youngs_modulus: f64,
    /// Structural density (kg/m³).
    pub rho_s: f64,
    /// Cross-section shared by rod and column (m²).
    pub area: f64,
    pub len_struct: f64,
    pub len_fluid: f64,
    pub rho_f: f64,
    pub sound_speed: f64,
    pub boundary: Boundary,
    /// When false the coupling block is zero.
    pub coupled: bool,
}

impl Default for ToyModelSpec {
    /// Steel pipe wall filled with water, 5 m + 5 m, 20 elements per field.
    fn default() -> Self {
        Self {
            kind: ToyKind::RodTubePiston,
            n_struct_elems: 20,
            n_fluid_elems: 20,
            youngs_modulus: 2.1e11,
            rho_s: 8000.0,
            area: 2.0e-4,
            len_struct: 5.0,
            len_fluid: 5.0,
            rho_f: 1010.0,
            sound_speed: 1480.0,
            boundary: Boundary::default(),
            coupled: true,
        }
    }
}

impl ToyModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_struct_elems < 2 {
            return Err(invalid("n_struct_elems", "must be at least 2"));
        }
        if self.n_fluid_elems < 2 {
            return Err(invalid("n_fluid_elems", "must be at least 2"));
        }
        for (name, v) in [
            ("youngs_modulus", self.youngs_modulus),
            ("rho_s", self.rho_s),
            ("area", self.area),
            ("len_struct", self.len_struct),
            ("len_fluid", self.len_fluid),
            ("rho_f", self.rho_f),
            ("sound_speed", self.sound_speed),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be strictly positive"));
            }
        }
        Ok(())
    }

    /// Number of structural DOFs left after boundary elimination.
    pub fn n_struct_dofs(&self) -> usize {
        self.n_struct_elems + 1
            - usize::from(self.boundary.struct_start_fixed)
            - usize::from(self.boundary.struct_end_fixed)
    }

    pub fn n_fluid_dofs(&self) -> usize {
        self.n_fluid_elems + 1 - usize::from(self.boundary.fluid_end_open)
    }

    /// Global DOF index of the piston tip, if it is free.
    pub fn tip_dof(&self) -> Option<usize> {
        (!self.boundary.struct_end_fixed).then(|| self.n_struct_dofs() - 1)
    }

    /// Global DOF index of structural node `node` (0 = root), if free.
    pub fn struct_node_dof(&self, node: usize) -> Option<usize> {
        let first = usize::from(self.boundary.struct_start_fixed);
        if node < first || node > self.n_struct_elems {
            return None;
        }
        if self.boundary.struct_end_fixed && node == self.n_struct_elems {
            return None;
        }
        Some(node - first)
    }

    /// Global DOF index of fluid node `node` (0 = piston face), if free.
    pub fn fluid_node_dof(&self, node: usize) -> Option<usize> {
        if node > self.n_fluid_elems || (self.boundary.fluid_end_open && node == self.n_fluid_elems) {
            return None;
        }
        Some(self.n_struct_dofs() + node)
    }
}

fn assemble_line(n_elems: usize, k_e: [f64; 4], m_e: [f64; 4]) -> (Mat, Mat) {
    let n = n_elems + 1;
    let mut k = Mat::zeros(n, n);
    let mut m = Mat::zeros(n, n);
    for e in 0..n_elems {
        for (local, (ke, me)) in k_e.iter().zip(m_e.iter()).enumerate() {
            let (i, j) = (e + local / 2, e + local % 2);
            k[(i, j)] += ke;
            m[(i, j)] += me;
        }
    }
    (k, m)
}

fn eliminate(m: &Mat, keep: &[usize]) -> Mat {
    Mat::from_fn(keep.len(), keep.len(), |i, j| m[(keep[i], keep[j])])
}

/// Builds the coupled system described by `spec`.
pub fn generate_toy(spec: &ToyModelSpec) -> Result<CoupledSystem> {
    spec.validate()?;
    let le_s = spec.len_struct / spec.n_struct_elems as f64;
    let le_f = spec.len_fluid / spec.n_fluid_elems as f64;
    let ks_e = spec.youngs_modulus * spec.area / le_s;
    let kf_e = spec.sound_speed * spec.sound_speed * spec.area / le_f;
    let ms_tot = spec.rho_s * spec.area * le_s;
    let mf_tot = spec.area * le_f;

    let stiff = |k: f64| [k, -k, -k, k];
    let consistent = |m: f64| [m / 3.0, m / 6.0, m / 6.0, m / 3.0];
    let lumped = |m: f64| [m / 2.0, 0.0, 0.0, m / 2.0];
    let (ms_e, mf_e) = match spec.kind {
        ToyKind::RodTubePiston => (consistent(ms_tot), consistent(mf_tot)),
        ToyKind::SpringMassChain => (lumped(ms_tot), lumped(mf_tot)),
    };
    let (ks_full, ms_full) = assemble_line(spec.n_struct_elems, stiff(ks_e), ms_e);
    let (kf_full, mf_full) = assemble_line(spec.n_fluid_elems, stiff(kf_e), mf_e);

    let keep_s: Vec<usize> = (0..=spec.n_struct_elems)
        .filter(|&i| spec.struct_node_dof(i).is_some())
        .collect();
    let keep_f: Vec<usize> = (0..=spec.n_fluid_elems)
        .filter(|&i| spec.fluid_node_dof(i).is_some())
        .collect();
    let ms = eliminate(&ms_full, &keep_s);
    let ks = eliminate(&ks_full, &keep_s);
    let mf = eliminate(&mf_full, &keep_f);
    let kf = eliminate(&kf_full, &keep_f);

    let mut c = Mat::zeros(keep_s.len(), keep_f.len());
    if spec.coupled {
        if let Some(tip) = spec.tip_dof() {
            c[(tip, 0)] = spec.area;
        }
    }
    CoupledSystem::new(ms, ks, mf, kf, c, spec.rho_f, spec.sound_speed)
}
