//! The Hermitian Stein equation `X = AᵀXA + Q` over symmetric `X`.

use nalgebra::{Complex, DVector};

use crate::error::{Error, Result};
use crate::geometry::{kernel_of_solution, unobservable_subspace};
use crate::numerics::{
    ensure_finite, ensure_symmetric, is_psd, min_eigenvalue, normalize_column_signs, spectral_norm, FullSvd, Matrix,
    Subspace, TolerancePolicy,
};

/// Coordinates of the upper triangle, row by row.
fn half_index(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

fn from_half(n: usize, h: &DVector<f64>) -> Matrix {
    let mut x = Matrix::zeros(n, n);
    for (k, &(i, j)) in half_index(n).iter().enumerate() {
        x[(i, j)] = h[k];
        x[(j, i)] = h[k];
    }
    x
}

/// Matrix of `X ↦ X − AᵀXA` on half-vectorized symmetric `X`.
pub fn half_vectorized_operator(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let idx = half_index(n);
    let mut op = Matrix::zeros(idx.len(), idx.len());
    for (row, &(i, j)) in idx.iter().enumerate() {
        for (col, &(k, l)) in idx.iter().enumerate() {
            let mut coeff = a[(k, i)] * a[(l, j)];
            if k != l {
                coeff += a[(l, i)] * a[(k, j)];
            }
            op[(row, col)] = -coeff;
            if (i, j) == (k, l) {
                op[(row, col)] += 1.0;
            }
        }
    }
    op
}

fn check_stein_data(a: &Matrix, q: &Matrix, tol: &TolerancePolicy) -> Result<()> {
    if !a.is_square() || q.shape() != a.shape() {
        return Err(Error::DimensionMismatch(format!(
            "Stein data A {}x{}, Q {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    ensure_finite(a, "A")?;
    ensure_finite(q, "Q")?;
    ensure_symmetric(q, "Q", tol)
}

/// No two eigenvalues with `|λᵢλⱼ − 1| ≤ √rank_rel` (pairs with `i = j` included).
pub fn is_unmixed(a: &Matrix, tol: &TolerancePolicy) -> bool {
    if a.nrows() == 0 {
        return true;
    }
    let eig: Vec<Complex<f64>> = a.complex_eigenvalues().iter().copied().collect();
    let one = Complex::new(1.0, 0.0);
    eig.iter()
        .enumerate()
        .all(|(i, l1)| eig[i..].iter().all(|l2| (l1 * l2 - one).norm() > tol.angle_tol()))
}

/// `‖X − AᵀXA − Q‖_F`
pub fn stein_residual(a: &Matrix, q: &Matrix, x: &Matrix) -> f64 {
    (x - a.transpose() * x * a - q).norm()
}

/// All symmetric solutions: `particular + span(homogeneous_basis)`.
#[derive(Debug, Clone)]
pub struct SteinSolutionSet {
    /// Minimum-norm solution in half-vectorized coordinates; `None` when the
    /// equation is inconsistent.
    pub particular: Option<Matrix>,
    pub homogeneous_basis: Vec<Matrix>,
    /// Least-squares residual of the half-vectorized system.
    pub residual: f64,
}

impl SteinSolutionSet {
    pub fn is_unique(&self) -> bool {
        self.particular.is_some() && self.homogeneous_basis.is_empty()
    }

    /// The solution, when there is exactly one.
    pub fn unique(&self) -> Result<&Matrix> {
        match &self.particular {
            None => Err(Error::Inconsistent {
                residual: self.residual,
            }),
            Some(_) if !self.homogeneous_basis.is_empty() => Err(Error::Underdetermined {
                dim: self.homogeneous_basis.len(),
            }),
            Some(x) => Ok(x),
        }
    }

    /// `particular + Σ coeffs[i] · homogeneous_basis[i]`.
    pub fn member(&self, coeffs: &[f64]) -> Result<Matrix> {
        let base = self.particular.as_ref().ok_or(Error::Inconsistent {
            residual: self.residual,
        })?;
        if coeffs.len() != self.homogeneous_basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a {}-dimensional family",
                coeffs.len(),
                self.homogeneous_basis.len()
            )));
        }
        Ok(self
            .homogeneous_basis
            .iter()
            .zip(coeffs)
            .fold(base.clone(), |acc, (h, c)| acc + h * *c))
    }
}

pub fn stein_solve(a: &Matrix, q: &Matrix, tol: &TolerancePolicy) -> Result<SteinSolutionSet> {
    check_stein_data(a, q, tol)?;
    let n = a.nrows();
    let idx = half_index(n);
    if idx.is_empty() {
        return Ok(SteinSolutionSet {
            particular: Some(Matrix::zeros(0, 0)),
            homogeneous_basis: Vec::new(),
            residual: 0.0,
        });
    }
    let op = half_vectorized_operator(a);
    let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&(i, j)| q[(i, j)]));
    let svd = FullSvd::new(&op);
    let sigma_max = svd.sigma_max();
    let cutoff = tol.rank_rel * idx.len() as f64 * sigma_max;
    let h = svd.solve(&rhs, cutoff);
    let residual = (&op * &h - &rhs).norm();
    let scale = rhs.norm() + sigma_max * h.norm();
    let mut null = svd.trailing_v(svd.rank_above(cutoff));
    normalize_column_signs(&mut null);
    let homogeneous_basis = null.column_iter().map(|col| from_half(n, &col.into_owned())).collect();
    let consistent = residual <= tol.angle_tol() * scale.max(f64::MIN_POSITIVE);
    Ok(SteinSolutionSet {
        particular: consistent.then(|| from_half(n, &h)),
        homogeneous_basis,
        residual,
    })
}

/// Kernels attached to a Stein solution and the containments they satisfy.
#[derive(Debug, Clone)]
pub struct SteinKernelReport {
    pub ker_x: Subspace,
    pub ker_q: Subspace,
    /// Present only when `A` is unmixed.
    pub unobservable: Option<Subspace>,
    /// `A ker X ⊆ ker X`
    pub a_invariant: bool,
    /// `ker X ⊆ ker Q`
    pub contained_in_ker_q: bool,
    /// `ker X` equals the unobservable subspace of `(A, Q)`; `None` when `A`
    /// is not unmixed.
    pub equals_unobservable: Option<bool>,
}

pub fn stein_kernel_report(a: &Matrix, q: &Matrix, x: &Matrix, tol: &TolerancePolicy) -> Result<SteinKernelReport> {
    check_stein_data(a, q, tol)?;
    if x.shape() != a.shape() {
        return Err(Error::DimensionMismatch(format!(
            "X must be {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_symmetric(x, "X", tol)?;
    if !is_psd(q, tol) {
        return Err(Error::NotPositiveSemidefinite {
            what: "Q".into(),
            min_eigenvalue: min_eigenvalue(q),
        });
    }
    let residual = stein_residual(a, q, x);
    let na = spectral_norm(a);
    if residual > tol.conv_rel.sqrt() * (1.0 + q.norm() + (1.0 + na * na) * x.norm()) {
        return Err(Error::SteinResidualTooLarge { residual });
    }
    let ker_x = kernel_of_solution(x, tol);
    let ker_q = kernel_of_solution(q, tol);
    let a_invariant = ker_x.contains_columns_scaled(&(a * ker_x.basis()), na, tol);
    let contained_in_ker_q = ker_q.contains(&ker_x, tol);
    let (unobservable, equals_unobservable) = if is_unmixed(a, tol) {
        let u = unobservable_subspace(a, q, tol)?;
        let eq = u.equals(&ker_x, tol);
        (Some(u), Some(eq))
    } else {
        (None, None)
    };
    Ok(SteinKernelReport {
        ker_x,
        ker_q,
        unobservable,
        a_invariant,
        contained_in_ker_q,
        equals_unobservable,
    })
}

/// Given `AᵀXF = X` and `BᵀXF = 0`, test `Bᵀ(Aᵀ)ᵏX = 0` for `k < n`.
pub fn unobservable_containment_check(
    a: &Matrix,
    b: &Matrix,
    f: &Matrix,
    x: &Matrix,
    tol: &TolerancePolicy,
) -> Result<bool> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || f.shape() != (n, n) || x.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "A {}x{}, B {}x{}, F {}x{}, X {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            f.nrows(),
            f.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    ensure_symmetric(x, "X", tol)?;
    let (na, nb, nf, nx) = (spectral_norm(a), spectral_norm(b), spectral_norm(f), spectral_norm(x));
    let first = (a.transpose() * x * f - x).norm();
    let second = (b.transpose() * x * f).norm();
    let eps = tol.angle_tol();
    if first > eps * (na * nf + 1.0) * nx || second > eps * nb * nf * nx {
        return Err(Error::PreconditionViolated(format!(
            "[Aᵀ; Bᵀ] X F ≠ [X; 0] (defects {first:.3e}, {second:.3e})"
        )));
    }
    let mut power = x.clone();
    let mut bound = nb * nx;
    for _ in 0..n.max(1) {
        if spectral_norm(&(b.transpose() * &power)) > eps * bound {
            return Ok(false);
        }
        power = a.transpose() * power;
        bound *= na.max(1.0);
    }
    Ok(true)
}
