//! Dense linear-algebra helpers shared by the solvers.
//!
//! Everything here works on `nalgebra` dynamic matrices and only needs
//! `alloc`; transcendental functions come from `libm` through `num-traits`.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{dim, Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// `‖M − Mᵀ‖_F / ‖M‖_F`, zero for the zero matrix.
pub fn relative_asymmetry(m: &Mat) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / norm
}

pub fn check_square(name: &str, m: &Mat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(dim(name, "square matrix", alloc::format!("{}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

pub fn check_symmetric(name: &str, m: &Mat, tol: f64) -> Result<()> {
    check_square(name, m)?;
    let defect = relative_asymmetry(m);
    if defect > tol {
        return Err(Error::NotSymmetric {
            name: name.to_string(),
            defect,
        });
    }
    Ok(())
}

pub fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: what.to_string(),
        })
    }
}

/// Returns `(M + Mᵀ)/2`.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &Mat) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Flips each column so its first significant component is positive.
fn fix_signs(vectors: &mut Mat) {
    for mut col in vectors.column_iter_mut() {
        let scale = col.amax();
        if scale == 0.0 {
            continue;
        }
        let pivot = col.iter().copied().find(|x| x.abs() > 1e-10 * scale);
        if matches!(pivot, Some(p) if p < 0.0) {
            col.neg_mut();
        }
    }
}

/// Eigenpairs of the symmetric-definite problem `K x = λ M x`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Eigenvalues in ascending order.
    pub values: Vector,
    /// Eigenvectors stored column-wise, in the order of `values`.
    pub vectors: Mat,
}

/// Solves `K x = λ M x` for the `count` smallest eigenvalues by Cholesky
/// reduction `M = L Lᵀ` to the standard problem `L⁻¹ K L⁻ᵀ y = λ y`.
///
/// With `mass_normalize` the vectors satisfy `Xᵀ M X = I`; otherwise each
/// column has unit Euclidean norm. Each column's first significant entry is
/// positive.
pub fn generalized_symmetric_eigen(
    stiffness: &Mat,
    mass: &Mat,
    count: usize,
    mass_normalize: bool,
    mass_name: &str,
) -> Result<GeneralizedEigen> {
    let n = mass.nrows();
    check_square(mass_name, mass)?;
    if stiffness.shape() != mass.shape() {
        return Err(dim(
            "stiffness/mass pair",
            alloc::format!("{n}x{n}"),
            alloc::format!("{}x{}", stiffness.nrows(), stiffness.ncols()),
        ));
    }
    if count == 0 || count > n {
        return Err(crate::error::invalid(
            "mode count",
            alloc::format!("{count} not in 1..={n}"),
        ));
    }
    let chol = Cholesky::new(symmetrize(mass)).ok_or_else(|| Error::NotPositiveDefinite {
        name: mass_name.to_string(),
    })?;
    let l = chol.l();
    // C = L⁻¹ K L⁻ᵀ
    let y = l
        .solve_lower_triangular(stiffness)
        .ok_or_else(|| Error::NotPositiveDefinite {
            name: mass_name.to_string(),
        })?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::NotPositiveDefinite {
            name: mass_name.to_string(),
        })?;
    let eig = SymmetricEigen::new(symmetrize(&c));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    order.truncate(count);

    let mut standard = Mat::zeros(n, count);
    let mut values = Vector::zeros(count);
    for (k, &i) in order.iter().enumerate() {
        standard.set_column(k, &eig.eigenvectors.column(i));
        values[k] = eig.eigenvalues[i];
    }
    // x = L⁻ᵀ y
    let mut vectors = l
        .transpose()
        .solve_upper_triangular(&standard)
        .ok_or_else(|| Error::NotPositiveDefinite {
            name: mass_name.to_string(),
        })?;
    if !mass_normalize {
        for mut col in vectors.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
    }
    fix_signs(&mut vectors);
    Ok(GeneralizedEigen { values, vectors })
}

/// LU factorization with partial pivoting that refuses numerically singular
/// matrices. The singularity test runs on a copy equilibrated by powers of
/// two, so it does not depend on the units of each DOF.
#[derive(Debug, Clone)]
pub struct Factorization {
    lu: LU<f64, Dyn, Dyn>,
    n: usize,
}

fn pow2_reciprocal(x: f64) -> f64 {
    if x > 0.0 {
        2f64.powi(-(x.log2().round() as i32))
    } else {
        1.0
    }
}

/// Whether `m`, after row and column equilibration, has an LU pivot below
/// `n·ε` of the largest entry of `U`.
fn numerically_singular(m: &Mat) -> bool {
    let n = m.nrows();
    if n == 0 {
        return false;
    }
    let mut e = m.clone();
    for i in 0..n {
        let r = pow2_reciprocal(e.row(i).amax());
        e.row_mut(i).scale_mut(r);
    }
    for j in 0..n {
        let c = pow2_reciprocal(e.column(j).amax());
        e.column_mut(j).scale_mut(c);
    }
    let u = LU::new(e).u();
    let scale = u.amax();
    let tiny = u.diagonal().iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    scale == 0.0 || tiny <= (n as f64) * f64::EPSILON * scale
}

impl Factorization {
    pub fn new(name: &str, m: &Mat, hint: &str) -> Result<Self> {
        check_square(name, m)?;
        check_finite(name, m.as_slice())?;
        if numerically_singular(m) {
            return Err(Error::Singular {
                name: name.to_string(),
                hint: hint.to_string(),
            });
        }
        Ok(Self {
            lu: LU::new(m.clone()),
            n: m.nrows(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &Vector) -> Vector {
        let mut x = rhs.clone();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, rhs: &mut Vector) {
        // Cannot fail: invertibility was checked at construction.
        let ok = self.lu.solve_mut(rhs);
        debug_assert!(ok);
    }

    pub fn solve_matrix(&self, rhs: &Mat) -> Mat {
        let mut x = rhs.clone();
        let ok = self.lu.solve_mut(&mut x);
        debug_assert!(ok);
        x
    }

    pub fn inverse(&self) -> Mat {
        self.solve_matrix(&Mat::identity(self.n, self.n))
    }
}

/// Matrix 1-norm (maximum absolute column sum).
pub fn norm1(m: &Mat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Diagonal balancing in the Parlett–Reinsch style. Returns `d` (powers of
/// two) and `D⁻¹·M·D` with `D = diag(d)`, so off-diagonal row and column
/// sums end up comparable. The similarity is exact in floating point.
pub fn balance(m: &Mat) -> (Vector, Mat) {
    const RADIX: f64 = 2.0;
    let n = m.nrows();
    let mut a = m.clone();
    let mut d = Vector::from_element(n, 1.0);
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let total = c + r;
            let mut f = 1.0;
            while c < r / RADIX {
                c *= RADIX;
                r /= RADIX;
                f *= RADIX;
            }
            while c >= r * RADIX {
                c /= RADIX;
                r *= RADIX;
                f /= RADIX;
            }
            if c + r < 0.95 * total {
                converged = false;
                d[i] *= f;
                a.row_mut(i).scale_mut(1.0 / f);
                a.column_mut(i).scale_mut(f);
            }
        }
    }
    (d, a)
}

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant, applied to the balanced matrix.
pub fn expm(a: &Mat) -> Result<Mat> {
    check_square("expm argument", a)?;
    check_finite("expm argument", a.as_slice())?;
    let (d, balanced) = balance(a);
    let e = expm_unbalanced(&balanced)?;
    Ok(Mat::from_fn(e.nrows(), e.ncols(), |i, j| e[(i, j)] * d[i] / d[j]))
}

fn expm_unbalanced(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let norm = norm1(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-squarings);
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let denom = Factorization::new("Pade denominator", &(&v - &u), "matrix exponential overflow")?;
    let mut x = denom.solve_matrix(&(&v + &u));
    for _ in 0..squarings {
        x = &x * &x;
    }
    check_finite("matrix exponential", x.as_slice())?;
    Ok(x)
}

/// Eigenvalues `λ` of the pencil `B x = λ A x` for invertible `A`, computed
/// as the spectrum of `A⁻¹B` with a dense real Schur decomposition.
///
/// Returns `(real parts ascending, largest |imag|/|λ| seen)`.
pub fn pencil_eigenvalues(a: &Mat, b: &Mat) -> Result<(Vec<f64>, f64)> {
    let fa = Factorization::new("pencil mass matrix", a, "pencil mass must be invertible")?;
    let (_, m) = balance(&fa.solve_matrix(b));
    let eig = m.complex_eigenvalues();
    let mut worst = 0.0f64;
    let mut real: Vec<f64> = eig
        .iter()
        .map(|z| {
            let mag = (z.re * z.re + z.im * z.im).sqrt();
            if mag > 0.0 {
                worst = worst.max(z.im.abs() / mag);
            }
            z.re
        })
        .collect();
    real.sort_by(f64::total_cmp);
    Ok((real, worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn generalized_eigen_scalar() {
        let k = Mat::from_element(1, 1, 8.0);
        let m = Mat::from_element(1, 1, 2.0);
        let e = generalized_symmetric_eigen(&k, &m, 1, true, "M").unwrap();
        assert_relative_eq!(e.values[0], 4.0, epsilon = 1e-14);
        assert_relative_eq!(e.vectors[(0, 0)], 1.0 / 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn generalized_eigen_rejects_indefinite_mass() {
        let k = Mat::identity(2, 2);
        let m = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            generalized_symmetric_eigen(&k, &m, 1, true, "Ms"),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn unit_norm_when_not_mass_normalized() {
        let k = Mat::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let m = Mat::from_diagonal(&Vector::from_vec(alloc::vec![3.0, 3.0]));
        let e = generalized_symmetric_eigen(&k, &m, 2, false, "M").unwrap();
        for c in e.vectors.column_iter() {
            assert_relative_eq!(c.norm(), 1.0, epsilon = 1e-14);
            assert!(c[0] > 0.0);
        }
    }

    #[test]
    fn singular_factorization_is_rejected() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            Factorization::new("K", &m, "hint"),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Mat::zeros(3, 3);
        assert_eq!(expm(&z).unwrap(), Mat::identity(3, 3));
    }

    #[test]
    fn expm_matches_nalgebra_on_random_matrices() {
        // nalgebra ships an independent Padé implementation; agreement is an
        // oracle for ours.
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        for scale in [0.01, 1.0, 10.0, 60.0] {
            let a = Mat::from_fn(5, 5, |_, _| next() * scale);
            let ours = expm(&a).unwrap();
            let reference = a.clone().exp();
            assert_relative_eq!(ours, reference, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn balancing_is_an_exact_similarity() {
        let m = Mat::from_row_slice(3, 3, &[1.0, 1e-8, 0.0, 1e10, 2.0, 1e-3, 3.0, 1e6, -1.0]);
        let (d, b) = balance(&m);
        for i in 0..3 {
            assert_eq!(d[i].log2().fract(), 0.0);
            for j in 0..3 {
                assert_eq!(b[(i, j)], m[(i, j)] * d[j] / d[i]);
            }
        }
        assert!(norm1(&b) < 1e-3 * norm1(&m));
    }

    #[test]
    fn expm_of_badly_scaled_oscillator() {
        let (w, dt, k) = (3.0e4, 1e-3, 1e9);
        let a = Mat::from_row_slice(2, 2, &[0.0, dt / k, -w * w * dt * k, 0.0]);
        let (s, c) = (w * dt).sin_cos();
        let want = Mat::from_row_slice(2, 2, &[c, s / (w * k), -w * s * k, c]);
        let got = expm(&a).unwrap();
        for (g, e) in got.iter().zip(want.iter()) {
            assert!((g - e).abs() <= 1e-10 * e.abs().max(1.0), "{g} vs {e}");
        }
    }

    #[test]
    fn pencil_of_diagonal_matrices() {
        let a = Mat::from_diagonal(&Vector::from_vec(alloc::vec![1.0, 2.0]));
        let b = Mat::from_diagonal(&Vector::from_vec(alloc::vec![9.0, 2.0]));
        let (vals, imag) = pencil_eigenvalues(&a, &b).unwrap();
        assert_relative_eq!(vals[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(vals[1], 9.0, epsilon = 1e-14);
        assert_eq!(imag, 0.0);
    }
}
