//! Coupled structural-acoustic systems in the displacement/pressure (u,p)
//! formulation and the Boolean selection operators that tie forces and
//! sensors to degrees of freedom.
//!
//! Global DOF vectors are ordered `[u; p]`: all structural DOFs first, then
//! all fluid pressure DOFs. Every index in this crate is **zero-based**.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::Cholesky;

use crate::error::{dim, invalid, Error, Result};
use crate::linalg::{check_square, check_symmetric, symmetrize, Mat};

/// Relative tolerance for the symmetry checks on the field blocks.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Physical blocks of an undamped coupled system.
///
/// Invariants (checked by [`CoupledSystem::new`]): `Ms, Ks, Mf, Kf` square
/// and symmetric, `Ms` positive definite, `C` is `n_s × n_f`, `rho_f > 0`
/// and `c > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSystem {
    ms: Mat,
    ks: Mat,
    mf: Mat,
    kf: Mat,
    coupling: Mat,
    rho_f: f64,
    sound_speed: f64,
}

impl CoupledSystem {
    pub fn new(
        ms: Mat,
        ks: Mat,
        mf: Mat,
        kf: Mat,
        coupling: Mat,
        rho_f: f64,
        sound_speed: f64,
    ) -> Result<Self> {
        check_symmetric("Ms", &ms, SYMMETRY_TOL)?;
        check_symmetric("Ks", &ks, SYMMETRY_TOL)?;
        check_symmetric("Mf", &mf, SYMMETRY_TOL)?;
        check_symmetric("Kf", &kf, SYMMETRY_TOL)?;
        let ns = ms.nrows();
        let nf = mf.nrows();
        if ks.nrows() != ns {
            return Err(dim("Ks", format!("{ns}x{ns}"), format!("{0}x{0}", ks.nrows())));
        }
        if kf.nrows() != nf {
            return Err(dim("Kf", format!("{nf}x{nf}"), format!("{0}x{0}", kf.nrows())));
        }
        if coupling.nrows() != ns || coupling.ncols() != nf {
            return Err(dim(
                "C",
                format!("{ns}x{nf}"),
                format!("{}x{}", coupling.nrows(), coupling.ncols()),
            ));
        }
        if !(rho_f > 0.0 && rho_f.is_finite()) {
            return Err(invalid("rho_f", "must be positive"));
        }
        if !(sound_speed > 0.0 && sound_speed.is_finite()) {
            return Err(invalid("c", "must be positive"));
        }
        if ns > 0 && Cholesky::new(symmetrize(&ms)).is_none() {
            return Err(Error::NotPositiveDefinite {
                name: "Ms".to_string(),
            });
        }
        Ok(Self {
            ms,
            ks,
            mf,
            kf,
            coupling,
            rho_f,
            sound_speed,
        })
    }

    pub fn ms(&self) -> &Mat {
        &self.ms
    }
    pub fn ks(&self) -> &Mat {
        &self.ks
    }
    pub fn mf(&self) -> &Mat {
        &self.mf
    }
    pub fn kf(&self) -> &Mat {
        &self.kf
    }
    pub fn coupling(&self) -> &Mat {
        &self.coupling
    }
    pub fn rho_f(&self) -> f64 {
        self.rho_f
    }
    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }
    pub fn n_struct(&self) -> usize {
        self.ms.nrows()
    }
    pub fn n_fluid(&self) -> usize {
        self.mf.nrows()
    }
    pub fn n_dof(&self) -> usize {
        self.n_struct() + self.n_fluid()
    }

    /// `ρ_f c²`, the scale of the fluid-side coupling block.
    pub fn coupling_scale(&self) -> f64 {
        self.rho_f * self.sound_speed * self.sound_speed
    }

    /// Builds the block mass and stiffness matrices
    ///
    /// ```text
    /// A = [ Ms        0  ]    B = [ Ks  -C ]
    ///     [ ρc²·Cᵀ    Mf ]        [ 0   Kf ]
    /// ```
    pub fn assemble(&self) -> Result<AssembledSystem> {
        assemble_blocks(
            &self.ms,
            &self.ks,
            &self.mf,
            &self.kf,
            &self.coupling,
            self.coupling_scale(),
        )
    }
}

/// Block-assembled pencil `(A, B)` of the coupled system. Neither matrix is
/// symmetric in general.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSystem {
    pub a: Mat,
    pub b: Mat,
    pub n_struct: usize,
    pub n_fluid: usize,
}

impl AssembledSystem {
    pub fn n_dof(&self) -> usize {
        self.n_struct + self.n_fluid
    }
}

/// Assembles raw blocks; see [`CoupledSystem::assemble`].
pub fn assemble_blocks(
    ms: &Mat,
    ks: &Mat,
    mf: &Mat,
    kf: &Mat,
    coupling: &Mat,
    coupling_scale: f64,
) -> Result<AssembledSystem> {
    check_square("Ms", ms)?;
    check_square("Mf", mf)?;
    let ns = ms.nrows();
    let nf = mf.nrows();
    if ks.shape() != (ns, ns) {
        return Err(dim("Ks", format!("{ns}x{ns}"), format!("{}x{}", ks.nrows(), ks.ncols())));
    }
    if kf.shape() != (nf, nf) {
        return Err(dim("Kf", format!("{nf}x{nf}"), format!("{}x{}", kf.nrows(), kf.ncols())));
    }
    if coupling.shape() != (ns, nf) {
        return Err(dim(
            "C",
            format!("{ns}x{nf} (n_s x n_f)"),
            format!("{}x{}", coupling.nrows(), coupling.ncols()),
        ));
    }
    let n = ns + nf;
    let mut a = Mat::zeros(n, n);
    let mut b = Mat::zeros(n, n);
    a.view_mut((0, 0), (ns, ns)).copy_from(ms);
    a.view_mut((ns, ns), (nf, nf)).copy_from(mf);
    a.view_mut((ns, 0), (nf, ns))
        .copy_from(&(coupling.transpose() * coupling_scale));
    b.view_mut((0, 0), (ns, ns)).copy_from(ks);
    b.view_mut((ns, ns), (nf, nf)).copy_from(kf);
    b.view_mut((0, ns), (ns, nf)).copy_from(&(-coupling));
    Ok(AssembledSystem {
        a,
        b,
        n_struct: ns,
        n_fluid: nf,
    })
}

/// Which global DOFs are measured (at displacement, velocity or acceleration
/// level) and where the unknown forces act. All indices are zero-based.
///
/// Measurement vectors are always stacked displacements first, then
/// velocities, then accelerations, each in list order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectionConfig {
    pub disp_idx: Vec<usize>,
    pub vel_idx: Vec<usize>,
    pub acc_idx: Vec<usize>,
    pub force_idx: Vec<usize>,
}

impl SelectionConfig {
    pub fn n_measurements(&self) -> usize {
        self.disp_idx.len() + self.vel_idx.len() + self.acc_idx.len()
    }

    pub fn n_forces(&self) -> usize {
        self.force_idx.len()
    }

    /// Checks ranges and duplicates against a system with `n_dof` DOFs.
    pub fn validate(&self, n_dof: usize) -> Result<()> {
        for (what, list) in [
            ("disp_idx", &self.disp_idx),
            ("vel_idx", &self.vel_idx),
            ("acc_idx", &self.acc_idx),
            ("force_idx", &self.force_idx),
        ] {
            let mut seen = Vec::with_capacity(list.len());
            for &i in list.iter() {
                if i >= n_dof {
                    return Err(Error::IndexOutOfRange {
                        what: what.to_string(),
                        index: i,
                        size: n_dof,
                    });
                }
                if seen.contains(&i) {
                    return Err(Error::DuplicateIndex {
                        what: what.to_string(),
                        index: i,
                    });
                }
                seen.push(i);
            }
        }
        Ok(())
    }

    /// Checks `n_z ≥ n_f`, the identifiability precondition.
    pub fn check_identifiable(&self) -> Result<()> {
        if self.n_measurements() < self.n_forces() {
            return Err(invalid(
                "selection",
                format!(
                    "{} measurements cannot identify {} forces",
                    self.n_measurements(),
                    self.n_forces()
                ),
            ));
        }
        Ok(())
    }
}

/// Row-selection matrix `S` (`idx.len() × n_dof`) with `S[i, idx[i]] = 1`.
pub fn selection_matrix(idx: &[usize], n_dof: usize) -> Mat {
    let mut s = Mat::zeros(idx.len(), n_dof);
    for (row, &col) in idx.iter().enumerate() {
        s[(row, col)] = 1.0;
    }
    s
}

/// Force placement matrix `S_f` (`n_dof × idx.len()`).
pub fn force_matrix(idx: &[usize], n_dof: usize) -> Mat {
    selection_matrix(idx, n_dof).transpose()
}
