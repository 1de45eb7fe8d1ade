//! Tolerance-aware dense linear algebra.
//!
//! Two kinds of numerical decisions are made here. Matrix-level rank
//! decisions (rank, pseudo-inverse, kernel and image bases) keep singular
//! values `σᵢ > rank_rel · max(rows, cols) · σ_max`. Subspace-level
//! decisions (containment, equality, sums, intersections) work with sines
//! of principal angles and use the threshold `√rank_rel`.

mod subspace;
mod svd;

pub use subspace::{subspace_contains, subspace_intersect, subspace_sum, Subspace};
pub use svd::{complex_singular_values, FullSvd};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense real matrix; every quantity in the crate is carried by one.
pub type Matrix = DMatrix<f64>;

/// Thresholds governing rank decisions, PSD clipping and convergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TolerancePolicy {
    pub rank_rel: f64,
    pub conv_rel: f64,
    pub psd_clip: f64,
    pub max_iter: usize,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            rank_rel: 1e-10,
            conv_rel: 1e-10,
            psd_clip: 1e-10,
            max_iter: 10_000,
        }
    }
}

impl TolerancePolicy {
    pub fn new(rank_rel: f64, conv_rel: f64, psd_clip: f64, max_iter: usize) -> Result<Self> {
        let policy = Self {
            rank_rel,
            conv_rel,
            psd_clip,
            max_iter,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("rank_rel", self.rank_rel),
            ("conv_rel", self.conv_rel),
            ("psd_clip", self.psd_clip),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidTolerance(format!(
                    "{name} must be finite and strictly positive, got {value}"
                )));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidTolerance("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Threshold on sines of principal angles.
    pub fn angle_tol(&self) -> f64 {
        self.rank_rel.sqrt()
    }

    /// Same policy with every relative threshold divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rank_rel: self.rank_rel / factor,
            conv_rel: self.conv_rel / factor,
            psd_clip: self.psd_clip / factor,
            max_iter: self.max_iter,
        }
    }

    /// `true` when `norm ≤ conv_rel · (1 + scale)`.
    pub fn negligible(&self, norm: f64, scale: f64) -> bool {
        norm <= self.conv_rel * (1.0 + scale)
    }
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if all_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite { what: what.into() })
    }
}

/// Frobenius norm of `m − mᵀ`.
pub fn asymmetry(m: &Matrix) -> f64 {
    (m - m.transpose()).norm()
}

pub fn ensure_symmetric(m: &Matrix, what: &str, tol: &TolerancePolicy) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = asymmetry(m);
    if asym > tol.psd_clip.sqrt() * m.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric {
            what: what.into(),
            asymmetry: asym,
        });
    }
    Ok(())
}

/// Singular values in nonincreasing order. Empty for a matrix with a zero dimension.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    svd::real_singular_values(m)
}

/// Largest singular value; `0` for empty matrices.
pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

fn rank_cutoff(rows: usize, cols: usize, sigma_max: f64, tol: &TolerancePolicy) -> f64 {
    tol.rank_rel * rows.max(cols) as f64 * sigma_max
}

/// Numerical rank: count of `σᵢ > rank_rel · max(rows, cols) · σ_max`.
pub fn rank_svd(m: &Matrix, tol: &TolerancePolicy) -> usize {
    let sv = singular_values(m);
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return 0;
    }
    let cutoff = rank_cutoff(m.nrows(), m.ncols(), sigma_max, tol);
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Moore-Penrose pseudo-inverse through the SVD.
pub fn pinv(m: &Matrix, tol: &TolerancePolicy) -> Matrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Matrix::zeros(cols, rows);
    }
    let svd = FullSvd::new(m);
    let sigma_max = svd.sigma_max();
    let mut out = Matrix::zeros(cols, rows);
    if sigma_max == 0.0 {
        return out;
    }
    let cutoff = rank_cutoff(rows, cols, sigma_max, tol);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            out += svd.v.column(i) * svd.u.column(i).transpose() / s;
        }
    }
    out
}

/// Eigendecomposition-backed pseudo-inverse of a symmetric matrix together
/// with an orthonormal basis of its numerical kernel.
///
/// `G = kernel · kernelᵀ` is then exactly the orthogonal projector onto the
/// kernel, and vanishes identically when the matrix is nonsingular.
#[derive(Debug, Clone)]
pub struct SymmetricPinv {
    pub pinv: Matrix,
    pub kernel: Matrix,
    pub rank: usize,
}

impl SymmetricPinv {
    pub fn new(m: &Matrix, tol: &TolerancePolicy) -> Self {
        Self::with_rank(m, tol, None)
    }

    /// With `forced_rank = Some(r)` the `r` eigenvalues of largest modulus
    /// are inverted regardless of the cutoff.
    pub fn with_rank(m: &Matrix, tol: &TolerancePolicy, forced_rank: Option<usize>) -> Self {
        Self::with_rank_scaled(m, tol, forced_rank, 0.0)
    }

    /// As [`SymmetricPinv::with_rank`], with the rank cutoff measured against
    /// `max(‖m‖₂, scale)`. A matrix formed by cancellation, such as
    /// `R + BᵀXB`, passes the size of its summands as `scale` so that pure
    /// roundoff is not mistaken for rank.
    pub fn with_rank_scaled(m: &Matrix, tol: &TolerancePolicy, forced_rank: Option<usize>, scale: f64) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self {
                pinv: Matrix::zeros(0, 0),
                kernel: Matrix::zeros(0, 0),
                rank: 0,
            };
        }
        let eig = SymmetricEigen::new(symmetrize(m));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .abs()
                .partial_cmp(&eig.eigenvalues[a].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let sigma_max = eig.eigenvalues[order[0]].abs();
        let rank = match forced_rank {
            Some(r) => r.min(n).min(eig.eigenvalues.iter().filter(|v| **v != 0.0).count()),
            None if sigma_max == 0.0 => 0,
            None => {
                let cutoff = rank_cutoff(n, n, sigma_max.max(scale), tol);
                order.iter().filter(|&&i| eig.eigenvalues[i].abs() > cutoff).count()
            }
        };
        let mut pinv = Matrix::zeros(n, n);
        for &i in &order[..rank] {
            let v = eig.eigenvectors.column(i);
            pinv += v * v.transpose() / eig.eigenvalues[i];
        }
        let mut kernel = Matrix::zeros(n, n - rank);
        for (j, &i) in order[rank..].iter().enumerate() {
            kernel.set_column(j, &eig.eigenvectors.column(i));
        }
        normalize_column_signs(&mut kernel);
        Self {
            pinv: symmetrize(&pinv),
            kernel,
            rank,
        }
    }

    /// Orthogonal projector onto the kernel.
    pub fn kernel_projector(&self) -> Matrix {
        &self.kernel * self.kernel.transpose()
    }
}

/// Pseudo-inverse of a symmetric matrix; the result is exactly symmetric.
pub fn pinv_symmetric(m: &Matrix, tol: &TolerancePolicy) -> Matrix {
    SymmetricPinv::new(m, tol).pinv
}

/// Flip column signs so the entry of largest modulus in each column is positive.
pub(crate) fn normalize_column_signs(m: &mut Matrix) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            // ties resolved towards the first entry
            if v.abs() > best + 1e-12 {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Right singular vectors with singular value at or below `cutoff`, computed
/// on a row-padded copy so the full right factor is available.
pub(crate) fn null_space_with_cutoff(m: &Matrix, cutoff: f64) -> Matrix {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Matrix::zeros(0, 0);
    }
    if rows == 0 {
        return Matrix::identity(cols, cols);
    }
    let svd = FullSvd::new(m);
    let mut basis = svd.trailing_v(svd.rank_above(cutoff));
    normalize_column_signs(&mut basis);
    basis
}

/// Left singular vectors with singular value above `cutoff`.
pub(crate) fn range_with_cutoff(m: &Matrix, cutoff: f64) -> Matrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Matrix::zeros(rows, 0);
    }
    let svd = FullSvd::new(m);
    let mut basis = svd.leading_u(svd.rank_above(cutoff));
    normalize_column_signs(&mut basis);
    basis
}

fn matrix_cutoff(m: &Matrix, tol: &TolerancePolicy) -> Option<f64> {
    let sigma_max = spectral_norm(m);
    (sigma_max > 0.0).then(|| rank_cutoff(m.nrows(), m.ncols(), sigma_max, tol))
}

/// Orthonormal basis of the null space at the rank decided by [`rank_svd`].
pub fn kernel_basis(m: &Matrix, tol: &TolerancePolicy) -> Subspace {
    let basis = match matrix_cutoff(m, tol) {
        Some(cutoff) => null_space_with_cutoff(m, cutoff),
        None => Matrix::identity(m.ncols(), m.ncols()),
    };
    Subspace::from_orthonormal(basis)
}

/// Orthonormal basis of the column space at the rank decided by [`rank_svd`].
pub fn image_basis(m: &Matrix, tol: &TolerancePolicy) -> Subspace {
    let basis = match matrix_cutoff(m, tol) {
        Some(cutoff) => range_with_cutoff(m, cutoff),
        None => Matrix::zeros(m.nrows(), 0),
    };
    Subspace::from_orthonormal(basis)
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    symmetric_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// `λ_min ≥ −psd_clip · max|λ|`.
pub fn is_psd(m: &Matrix, tol: &TolerancePolicy) -> bool {
    let ev = symmetric_eigenvalues(m);
    let scale = ev.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    ev.first().is_none_or(|&lo| lo >= -tol.psd_clip * scale)
}

fn checked_psd_eigen(
    m: &Matrix,
    what: &str,
    tol: &TolerancePolicy,
) -> Result<(SymmetricEigen<f64, nalgebra::Dyn>, f64)> {
    ensure_symmetric(m, what, tol)?;
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lo < -tol.psd_clip * scale {
        return Err(Error::NotPositiveSemidefinite {
            what: what.into(),
            min_eigenvalue: lo,
        });
    }
    Ok((eig, scale))
}

/// Factor `F` with `FᵀF = M` and `rank(M)` rows.
///
/// Rows are ordered by decreasing eigenvalue; eigenvalues in
/// `[−psd_clip · σ_max, 0)` are clipped to zero.
pub fn psd_factor(m: &Matrix, tol: &TolerancePolicy) -> Result<Matrix> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, m.ncols()));
    }
    let (eig, scale) = checked_psd_eigen(m, "matrix", tol)?;
    let cutoff = rank_cutoff(n, n, scale, tol);
    let mut order: Vec<usize> = (0..n).filter(|&i| scale > 0.0 && eig.eigenvalues[i] > cutoff).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut vectors = Matrix::zeros(n, order.len());
    for (j, &i) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(i));
    }
    normalize_column_signs(&mut vectors);
    let mut factor = vectors.transpose();
    for (j, &i) in order.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        factor.row_mut(j).scale_mut(s);
    }
    Ok(factor)
}

/// Symmetric PSD square root with clipping of tiny negative eigenvalues.
pub fn psd_sqrt(m: &Matrix, what: &str, tol: &TolerancePolicy) -> Result<Matrix> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let (eig, _) = checked_psd_eigen(m, what, tol)?;
    let mut root = Matrix::zeros(n, n);
    for i in 0..n {
        let lam = eig.eigenvalues[i].max(0.0);
        let v = eig.eigenvectors.column(i);
        root += v * v.transpose() * lam.sqrt();
    }
    Ok(symmetrize(&root))
}

/// Generalized Schur complement `P11 − P12 · P22† · P12ᵀ` of a symmetric
/// PSD block matrix.
///
/// Checks on the way that `ker P22 ⊆ ker P12` and `P12 · P22† · P22 = P12`,
/// which hold for every PSD block matrix.
pub fn schur_psd(p11: &Matrix, p12: &Matrix, p22: &Matrix, tol: &TolerancePolicy) -> Result<Matrix> {
    let (n, m) = p12.shape();
    if p11.shape() != (n, n) || p22.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "Schur blocks {}x{}, {}x{}, {}x{}",
            p11.nrows(),
            p11.ncols(),
            n,
            m,
            p22.nrows(),
            p22.ncols()
        )));
    }
    let p = block2x2(p11, p12, &p12.transpose(), p22);
    checked_psd_eigen(&p, "block matrix", tol)?;

    let split = SymmetricPinv::new(p22, tol);
    let scale = spectral_norm(&p).max(f64::MIN_POSITIVE);
    let bound = (tol.rank_rel * (n + m).max(1) as f64).sqrt() * scale;
    let leak = spectral_norm(&(p12 * &split.kernel));
    if leak > bound {
        return Err(Error::NumericalInconsistency(format!(
            "ker P22 not contained in ker P12 (leak {leak:.3e})"
        )));
    }
    let range_defect = (p12 * &split.pinv * p22 - p12).norm();
    if range_defect > bound * (m.max(1) as f64).sqrt() {
        return Err(Error::NumericalInconsistency(format!(
            "P12 P22† P22 ≠ P12 (defect {range_defect:.3e})"
        )));
    }
    Ok(symmetrize(&(p11 - p12 * &split.pinv * p12.transpose())))
}

/// Assemble `[[a, b], [c, d]]`.
pub fn block2x2(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Matrix {
    let (r1, c1) = a.shape();
    let (r2, c2) = d.shape();
    let mut out = Matrix::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((0, c1), (r1, c2)).copy_from(b);
    out.view_mut((r1, 0), (r2, c1)).copy_from(c);
    out.view_mut((r1, c1), (r2, c2)).copy_from(d);
    out
}

/// Stack `top` over `bottom`.
pub fn vstack(top: &Matrix, bottom: &Matrix) -> Matrix {
    assert_eq!(top.ncols(), bottom.ncols(), "vstack column mismatch");
    let mut out = Matrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

/// Place `left` and `right` side by side.
pub fn hstack(left: &Matrix, right: &Matrix) -> Matrix {
    assert_eq!(left.nrows(), right.nrows(), "hstack row mismatch");
    let mut out = Matrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape()).copy_from(right);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_svd(&m(2, 2, &[1.0, 1.0, 1.0, 1.0]), &tol()), 1);
        assert_eq!(rank_svd(&Matrix::zeros(3, 2), &tol()), 0);
        assert_eq!(rank_svd(&Matrix::identity(4, 4), &tol()), 4);
        assert_eq!(rank_svd(&Matrix::zeros(0, 3), &tol()), 0);
    }

    #[test]
    fn pinv_examples() {
        let eye = Matrix::identity(3, 3);
        assert_relative_eq!(pinv(&eye, &tol()), eye, epsilon = 1e-14);

        let ones = m(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_relative_eq!(pinv(&ones, &tol()), &ones / 4.0, epsilon = 1e-14);
        assert_relative_eq!(pinv_symmetric(&ones, &tol()), &ones / 4.0, epsilon = 1e-14);

        let diag = m(2, 2, &[16.0, 0.0, 0.0, 0.0]);
        let expected = m(2, 2, &[1.0 / 16.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(pinv(&diag, &tol()), expected, epsilon = 1e-14);
    }

    #[test]
    fn pinv_of_rectangular_and_empty() {
        let a = m(1, 2, &[3.0, 4.0]);
        assert_relative_eq!(pinv(&a, &tol()), m(2, 1, &[3.0 / 25.0, 4.0 / 25.0]), epsilon = 1e-14);
        assert_eq!(pinv(&Matrix::zeros(0, 2), &tol()).shape(), (2, 0));
    }

    #[test]
    fn kernel_and_image_examples() {
        let k = kernel_basis(&m(2, 2, &[0.0, 0.0, 0.0, 4.0]), &tol());
        assert_eq!(k.dim(), 1);
        assert_relative_eq!(k.basis()[(0, 0)].abs(), 1.0, epsilon = 1e-14);

        assert_eq!(kernel_basis(&Matrix::identity(3, 3), &tol()).dim(), 0);

        let im = image_basis(&m(2, 2, &[1.0, -1.0, 0.0, 0.0]), &tol());
        assert_eq!(im.dim(), 1);
        assert!(im.equals(&Subspace::from_orthonormal(m(2, 1, &[1.0, 0.0])), &tol()));

        // wide matrix: kernel needs the full right factor
        let wide = m(1, 3, &[1.0, 1.0, 0.0]);
        let kw = kernel_basis(&wide, &tol());
        assert_eq!(kw.dim(), 2);
        assert!((&wide * kw.basis()).norm() < 1e-14);
    }

    #[test]
    fn psd_factor_examples() {
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]));
        let f = psd_factor(&d, &tol()).unwrap();
        assert_eq!(f.shape(), (1, 4));
        assert_relative_eq!(f, m(1, 4, &[0.0, 1.0, 0.0, 0.0]), epsilon = 1e-14);

        let eye = Matrix::identity(2, 2);
        let fe = psd_factor(&eye, &tol()).unwrap();
        assert_relative_eq!(fe.transpose() * &fe, eye, epsilon = 1e-14);

        let indefinite = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, 1.0, 0.0]));
        match psd_factor(&indefinite, &tol()) {
            Err(Error::NotPositiveSemidefinite { min_eigenvalue, .. }) => {
                assert_relative_eq!(min_eigenvalue, -1.0, epsilon = 1e-14)
            }
            other => panic!("expected NotPositiveSemidefinite, got {other:?}"),
        }
    }

    #[test]
    fn psd_factor_clips_roundoff_negatives() {
        let mut d = Matrix::identity(2, 2);
        d[(1, 1)] = -1e-14;
        let f = psd_factor(&d, &tol()).unwrap();
        assert_eq!(f.nrows(), 1);
    }

    #[test]
    fn schur_examples() {
        let one = m(1, 1, &[1.0]);
        let two = m(1, 1, &[2.0]);
        assert_relative_eq!(
            schur_psd(&one, &one, &one, &tol()).unwrap()[(0, 0)],
            0.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            schur_psd(&two, &one, &one, &tol()).unwrap()[(0, 0)],
            1.0,
            epsilon = 1e-14
        );

        let eye = Matrix::identity(2, 2);
        let zero = Matrix::zeros(2, 2);
        assert_relative_eq!(schur_psd(&eye, &zero, &zero, &tol()).unwrap(), eye, epsilon = 1e-14);

        // indefinite assembled matrix
        assert!(matches!(
            schur_psd(&one, &two, &one, &tol()),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn tolerance_validation() {
        assert!(TolerancePolicy::new(1e-10, 1e-10, 1e-10, 10).is_ok());
        assert!(TolerancePolicy::new(0.0, 1e-10, 1e-10, 10).is_err());
        assert!(TolerancePolicy::new(1e-10, f64::NAN, 1e-10, 10).is_err());
        assert!(TolerancePolicy::new(1e-10, 1e-10, 1e-10, 0).is_err());
    }

    #[test]
    fn symmetry_check() {
        let asym = m(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            ensure_symmetric(&asym, "Q", &tol()),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(ensure_symmetric(&Matrix::zeros(2, 2), "Q", &tol()).is_ok());
    }
}
