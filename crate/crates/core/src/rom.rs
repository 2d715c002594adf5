//! Strongly coupled vibroacoustic reduced-order model.
//!
//! The structural displacement is expanded on structural modes plus the
//! static response to the retained fluid modes,
//!
//! ```text
//! u ≈ Φ_d·q + Ψ·Ξ̃_d·r,   p ≈ Ξ̃_d·r,   Ψ = Ks⁻¹·C,
//! ```
//!
//! where the fluid modes are taken against the coupling-corrected mass
//! `M̃f = Mf + (ρc²·Cᵀ + Ψᵀ·Ms)·Ψ`. The basis
//!
//! ```text
//! T = [ Φ_d   Ψ·Ξ̃_d ]
//!     [ 0     Ξ̃_d   ]
//! ```
//!
//! projects the pencil as `Â = Tᵀ·A·T`, `B̂ = Tᵀ·B·T`, and modal Rayleigh
//! damping is attached per field.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{dim, invalid, Error, Result};
use crate::linalg::{
    generalized_symmetric_eigen, min_symmetric_eigenvalue, pencil_eigenvalues, relative_asymmetry,
    symmetrize, Factorization, Mat, Vector,
};
use crate::newmark::SecondOrderSystem;
use crate::system::{AssembledSystem, CoupledSystem};

/// Residual tolerance for the static coupling map.
pub const STATIC_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RomSpec {
    pub n_modes_struct: usize,
    pub n_modes_fluid: usize,
    pub mass_normalize: bool,
}

impl RomSpec {
    pub fn new(n_modes_struct: usize, n_modes_fluid: usize) -> Self {
        Self {
            n_modes_struct,
            n_modes_fluid,
            mass_normalize: true,
        }
    }

    pub fn validate(&self, sys: &CoupledSystem) -> Result<()> {
        if self.n_modes_struct == 0 || self.n_modes_struct > sys.n_struct() {
            return Err(invalid(
                "n_modes_struct",
                format!("{} not in 1..={}", self.n_modes_struct, sys.n_struct()),
            ));
        }
        if self.n_modes_fluid == 0 || self.n_modes_fluid > sys.n_fluid() {
            return Err(invalid(
                "n_modes_fluid",
                format!("{} not in 1..={}", self.n_modes_fluid, sys.n_fluid()),
            ));
        }
        Ok(())
    }
}

/// Rayleigh coefficients, mass- and stiffness-proportional, per field.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DampingSpec {
    pub a1s: f64,
    pub a2s: f64,
    pub a1f: f64,
    pub a2f: f64,
}

impl DampingSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a1s", self.a1s),
            ("a2s", self.a2s),
            ("a1f", self.a1f),
            ("a2f", self.a2f),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "damping coefficients must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Mode shapes (column-wise) and their eigenvalues (ascending, 1/time²).
#[derive(Debug, Clone, PartialEq)]
pub struct Modes {
    pub shapes: Mat,
    pub eigenvalues: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    /// Transformation basis, `n_d × m`.
    pub t: Mat,
    pub a_hat: Mat,
    pub b_hat: Mat,
    pub d_hat: Mat,
    pub lambda_struct: Vector,
    pub gamma_fluid: Vector,
    pub psi: Mat,
}

impl ReducedModel {
    /// Number of generalized coordinates.
    pub fn n_reduced(&self) -> usize {
        self.t.ncols()
    }

    pub fn n_dof(&self) -> usize {
        self.t.nrows()
    }

    /// Projects an arbitrary basis `t` onto the full pencil with the given
    /// reduced damping matrix.
    pub fn from_basis(full: &AssembledSystem, t: Mat, d_hat: Mat) -> Result<Self> {
        if t.nrows() != full.n_dof() {
            return Err(dim("basis rows", full.n_dof(), t.nrows()));
        }
        let m = t.ncols();
        if d_hat.shape() != (m, m) {
            return Err(dim("reduced damping", format!("{m}x{m}"), format!("{}x{}", d_hat.nrows(), d_hat.ncols())));
        }
        let tt = t.transpose();
        Ok(Self {
            a_hat: &tt * &full.a * &t,
            b_hat: &tt * &full.b * &t,
            d_hat,
            t,
            lambda_struct: Vector::zeros(0),
            gamma_fluid: Vector::zeros(0),
            psi: Mat::zeros(full.n_struct, full.n_fluid),
        })
    }

    /// Reduced force operator `Tᵀ·S_f` for forces acting on `force_idx`.
    pub fn force_operator(&self, force_idx: &[usize]) -> Mat {
        let mut op = Mat::zeros(self.n_reduced(), force_idx.len());
        for (j, &dof) in force_idx.iter().enumerate() {
            op.set_column(j, &self.t.row(dof).transpose());
        }
        op
    }

    /// `Â·q̈ + D̂·q̇ + B̂·q = Tᵀ·S_f·f` as an integrable system.
    pub fn second_order(&self, force_idx: &[usize]) -> Result<SecondOrderSystem> {
        SecondOrderSystem::new(
            self.a_hat.clone(),
            self.d_hat.clone(),
            self.b_hat.clone(),
            self.force_operator(force_idx),
        )
    }
}

/// `Ψ = Ks⁻¹·C` by factorize-and-solve.
pub fn static_coupling_map(sys: &CoupledSystem) -> Result<Mat> {
    let ks = Factorization::new(
        "Ks",
        sys.ks(),
        "structure is free-floating; add boundary constraints",
    )?;
    let psi = ks.solve_matrix(sys.coupling());
    let c_norm = sys.coupling().norm();
    if c_norm > 0.0 {
        let residual = (sys.ks() * &psi - sys.coupling()).norm() / c_norm;
        if residual > STATIC_RESIDUAL_TOL {
            return Err(Error::Singular {
                name: "Ks".to_string(),
                hint: format!("static solve residual {residual:.3e} exceeds tolerance"),
            });
        }
    }
    Ok(psi)
}

/// The `count` lowest modes of `Ks·φ = λ·Ms·φ`.
pub fn structural_modes(sys: &CoupledSystem, count: usize, mass_normalize: bool) -> Result<Modes> {
    let e = generalized_symmetric_eigen(sys.ks(), sys.ms(), count, mass_normalize, "Ms")?;
    Ok(Modes {
        shapes: e.vectors,
        eigenvalues: clamp_roundoff(&e.values),
    })
}

/// `M̃f = Mf + (ρc²·Cᵀ + Ψᵀ·Ms)·Ψ`.
pub fn partially_reduced_fluid_mass(sys: &CoupledSystem, psi: &Mat) -> Result<Mat> {
    if psi.shape() != sys.coupling().shape() {
        return Err(dim(
            "Psi",
            format!("{}x{}", sys.n_struct(), sys.n_fluid()),
            format!("{}x{}", psi.nrows(), psi.ncols()),
        ));
    }
    let correction = (sys.coupling().transpose() * sys.coupling_scale() + psi.transpose() * sys.ms()) * psi;
    Ok(sys.mf() + correction)
}

/// The `count` lowest modes of `Kf·ξ = γ·M̃f·ξ`.
pub fn fluid_modes(kf: &Mat, mf_tilde: &Mat, count: usize, mass_normalize: bool) -> Result<Modes> {
    if relative_asymmetry(mf_tilde) > 1e-8 {
        return Err(Error::NotSymmetric {
            name: "partially reduced fluid mass".to_string(),
            defect: relative_asymmetry(mf_tilde),
        });
    }
    let e = generalized_symmetric_eigen(kf, &symmetrize(mf_tilde), count, mass_normalize, "M~f")
        .map_err(|err| match err {
            Error::NotPositiveDefinite { name } => Error::IndefiniteMass {
                name,
                min_eigenvalue: min_symmetric_eigenvalue(mf_tilde),
            },
            other => other,
        })?;
    Ok(Modes {
        shapes: e.vectors,
        eigenvalues: clamp_roundoff(&e.values),
    })
}

/// Round-off negatives of a PSD stiffness are clamped to 0.
fn clamp_roundoff(values: &Vector) -> Vector {
    let scale = values.amax();
    values.map(|v| if v < 0.0 && v.abs() <= 1e-9 * scale { 0.0 } else { v })
}

/// Assembles the reduced model from previously computed bases.
pub fn build_reduced(
    sys: &CoupledSystem,
    structural: &Modes,
    psi: &Mat,
    fluid: &Modes,
    damping: &DampingSpec,
) -> Result<ReducedModel> {
    damping.validate()?;
    let ns = sys.n_struct();
    let nf = sys.n_fluid();
    let ms = structural.shapes.ncols();
    let mf = fluid.shapes.ncols();
    if structural.shapes.nrows() != ns {
        return Err(dim("structural modes", ns, structural.shapes.nrows()));
    }
    if fluid.shapes.nrows() != nf {
        return Err(dim("fluid modes", nf, fluid.shapes.nrows()));
    }
    let m = ms + mf;
    let mut t = Mat::zeros(ns + nf, m);
    t.view_mut((0, 0), (ns, ms)).copy_from(&structural.shapes);
    t.view_mut((0, ms), (ns, mf)).copy_from(&(psi * &fluid.shapes));
    t.view_mut((ns, ms), (nf, mf)).copy_from(&fluid.shapes);

    let mut d = Vector::zeros(m);
    for (i, lam) in structural.eigenvalues.iter().enumerate() {
        d[i] = damping.a1s + damping.a2s * lam;
    }
    for (j, gam) in fluid.eigenvalues.iter().enumerate() {
        d[ms + j] = damping.a1f + damping.a2f * gam;
    }
    let full = sys.assemble()?;
    let mut red = ReducedModel::from_basis(&full, t, Mat::from_diagonal(&d))?;
    red.lambda_struct = structural.eigenvalues.clone();
    red.gamma_fluid = fluid.eigenvalues.clone();
    red.psi = psi.clone();
    Ok(red)
}

/// Runs the full reduction pipeline.
pub fn reduce(sys: &CoupledSystem, spec: &RomSpec, damping: &DampingSpec) -> Result<ReducedModel> {
    spec.validate(sys)?;
    let psi = static_coupling_map(sys)?;
    let structural = structural_modes(sys, spec.n_modes_struct, spec.mass_normalize)?;
    let mf_tilde = partially_reduced_fluid_mass(sys, &psi)?;
    let fluid = fluid_modes(sys.kf(), &mf_tilde, spec.n_modes_fluid, spec.mass_normalize)?;
    build_reduced(sys, &structural, &psi, &fluid, damping)
}

/// Relative errors `|λ_red − λ_full| / λ_full` for the `k` smallest nonzero
/// eigenvalues of the full and reduced pencils, both sorted ascending.
pub fn eigenvalue_error(full: &AssembledSystem, red: &ReducedModel, k: usize) -> Result<Vec<f64>> {
    let full_vals = nonzero_spectrum(&full.a, &full.b)?;
    let red_vals = nonzero_spectrum(&red.a_hat, &red.b_hat)?;
    let available = full_vals.len().min(red_vals.len());
    if k > available {
        return Err(invalid(
            "k",
            format!("{k} exceeds the {available} nonzero modes available"),
        ));
    }
    Ok(full_vals
        .iter()
        .zip(red_vals.iter())
        .take(k)
        .map(|(f, r)| (r - f).abs() / f.abs())
        .collect())
}

/// Pencil eigenvalues with the (near-)zero ones removed.
pub fn nonzero_spectrum(a: &Mat, b: &Mat) -> Result<Vec<f64>> {
    let (vals, _) = pencil_eigenvalues(a, b)?;
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(vals.into_iter().filter(|v| v.abs() > 1e-10 * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn scalar(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    #[test]
    fn psi_scalar_and_zero() {
        let sys = CoupledSystem::new(scalar(1.0), scalar(5.0), scalar(1.0), scalar(1.0), scalar(10.0), 1.0, 1.0)
            .unwrap();
        assert_relative_eq!(static_coupling_map(&sys).unwrap()[(0, 0)], 2.0);
        let sys = CoupledSystem::new(scalar(1.0), scalar(5.0), scalar(1.0), scalar(1.0), scalar(0.0), 1.0, 1.0)
            .unwrap();
        assert_eq!(static_coupling_map(&sys).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn free_floating_structure_is_rejected() {
        let ks = Mat::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let sys = CoupledSystem::new(Mat::identity(2, 2), ks, scalar(1.0), scalar(1.0), Mat::zeros(2, 1), 1.0, 1.0)
            .unwrap();
        let err = static_coupling_map(&sys).unwrap_err();
        assert!(matches!(err, Error::Singular { ref hint, .. } if hint.contains("boundary")));
    }

    #[test]
    fn structural_modes_textbook_cases() {
        let sys = CoupledSystem::new(scalar(2.0), scalar(8.0), scalar(1.0), scalar(1.0), scalar(0.0), 1.0, 1.0)
            .unwrap();
        let modes = structural_modes(&sys, 1, true).unwrap();
        assert_relative_eq!(modes.eigenvalues[0], 4.0, epsilon = 1e-14);
        assert_relative_eq!(modes.shapes[(0, 0)].abs(), 1.0 / 2f64.sqrt(), epsilon = 1e-14);

        let ks = Mat::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let sys = CoupledSystem::new(Mat::identity(2, 2), ks, scalar(1.0), scalar(1.0), Mat::zeros(2, 1), 1.0, 1.0)
            .unwrap();
        let modes = structural_modes(&sys, 2, true).unwrap();
        assert_relative_eq!(modes.eigenvalues, Vector::from_vec(vec![1.0, 3.0]), epsilon = 1e-13);
    }

    #[test]
    fn partially_reduced_mass_scalar() {
        // Ms=2, Ks=1, Mf=3, C=1, ρc²=4 → Ψ=1, M̃f = 3 + (4+2)·1 = 9
        let sys = CoupledSystem::new(scalar(2.0), scalar(1.0), scalar(3.0), scalar(18.0), scalar(1.0), 1.0, 2.0)
            .unwrap();
        let psi = static_coupling_map(&sys).unwrap();
        let mt = partially_reduced_fluid_mass(&sys, &psi).unwrap();
        assert_relative_eq!(mt[(0, 0)], 9.0, epsilon = 1e-14);
        let fm = fluid_modes(sys.kf(), &mt, 1, true).unwrap();
        assert_relative_eq!(fm.eigenvalues[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_coupling_leaves_fluid_mass_unchanged() {
        let sys = CoupledSystem::new(scalar(2.0), scalar(1.0), scalar(3.0), scalar(1.0), scalar(0.0), 1.0, 2.0)
            .unwrap();
        let psi = static_coupling_map(&sys).unwrap();
        assert_eq!(partially_reduced_fluid_mass(&sys, &psi).unwrap(), *sys.mf());
    }

    #[test]
    fn indefinite_corrected_mass_reports_min_eigenvalue() {
        let mt = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        match fluid_modes(&Mat::identity(2, 2), &mt, 1, true) {
            Err(Error::IndefiniteMass { min_eigenvalue, .. }) => assert_relative_eq!(min_eigenvalue, -2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rayleigh_damping_blocks() {
        let sys = CoupledSystem::new(
            Mat::identity(2, 2),
            Mat::from_diagonal(&Vector::from_vec(vec![4.0, 9.0])),
            scalar(1.0),
            scalar(16.0),
            Mat::zeros(2, 1),
            1.0,
            1.0,
        )
        .unwrap();
        let damping = DampingSpec {
            a1s: 2.0,
            a2s: 0.1,
            a1f: 0.5,
            a2f: 0.25,
        };
        let red = reduce(&sys, &RomSpec::new(2, 1), &damping).unwrap();
        assert_relative_eq!(red.d_hat.diagonal(), Vector::from_vec(vec![2.4, 2.9, 4.5]), epsilon = 1e-14);
        let undamped = reduce(&sys, &RomSpec::new(2, 1), &DampingSpec::default()).unwrap();
        assert!(undamped.d_hat.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identity_basis_has_zero_eigenvalue_error() {
        let sys = CoupledSystem::new(
            Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            Mat::from_row_slice(2, 2, &[30.0, -10.0, -10.0, 20.0]),
            scalar(0.5),
            scalar(7.0),
            Mat::from_row_slice(2, 1, &[0.0, 0.3]),
            1.0,
            2.0,
        )
        .unwrap();
        let full = sys.assemble().unwrap();
        let red = ReducedModel::from_basis(&full, Mat::identity(3, 3), Mat::zeros(3, 3)).unwrap();
        let errs = eigenvalue_error(&full, &red, 3).unwrap();
        assert!(errs.iter().all(|&e| e == 0.0));
        assert!(eigenvalue_error(&full, &red, 4).is_err());
    }

    #[test]
    fn rom_spec_bounds() {
        let sys = CoupledSystem::new(scalar(1.0), scalar(1.0), scalar(1.0), scalar(1.0), scalar(0.0), 1.0, 1.0)
            .unwrap();
        assert!(RomSpec::new(0, 1).validate(&sys).is_err());
        assert!(RomSpec::new(1, 2).validate(&sys).is_err());
        assert!(RomSpec::new(1, 1).validate(&sys).is_ok());
    }
}
