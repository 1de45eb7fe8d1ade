use super::{hstack, null_space_with_cutoff, range_with_cutoff, spectral_norm, vstack, Matrix, TolerancePolicy};
use crate::error::{Error, Result};

/// Subspace of ℝⁿ carried by an orthonormal column basis (`n × k`, `k` may be 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Matrix,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            basis: Matrix::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self {
            basis: Matrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// Wrap a basis that is already orthonormal.
    pub fn from_orthonormal(basis: Matrix) -> Self {
        Self { basis }
    }

    /// Span of the columns of `m`, keeping directions whose singular value
    /// exceeds `√rank_rel · scale`.
    pub fn span_scaled(m: &Matrix, scale: f64, tol: &TolerancePolicy) -> Self {
        if scale <= 0.0 {
            return Self::zero(m.nrows());
        }
        Self {
            basis: range_with_cutoff(m, tol.angle_tol() * scale),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn projector(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }

    /// `‖BᵀB − I‖_F` for the stored basis.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.dim();
        (self.basis.transpose() * &self.basis - Matrix::identity(k, k)).norm()
    }

    pub fn complement(&self) -> Self {
        let n = self.ambient_dim();
        if self.is_zero() {
            return Self::full(n);
        }
        Self {
            basis: null_space_with_cutoff(&self.basis.transpose(), 0.5),
        }
    }

    /// Component of the columns of `m` orthogonal to this subspace.
    pub fn residual_of(&self, m: &Matrix) -> Matrix {
        m - &self.basis * (self.basis.transpose() * m)
    }

    /// Every column of `m` lies in the subspace up to a principal-angle
    /// sine of `√rank_rel`, measured against `‖m‖₂`.
    pub fn contains_columns(&self, m: &Matrix, tol: &TolerancePolicy) -> bool {
        let scale = spectral_norm(m);
        if scale == 0.0 {
            return true;
        }
        spectral_norm(&self.residual_of(m)) <= tol.angle_tol() * scale
    }

    /// Like [`Subspace::contains_columns`] with the residual measured against
    /// an explicit `scale` (typically the norm of the map producing `m`).
    pub fn contains_columns_scaled(&self, m: &Matrix, scale: f64, tol: &TolerancePolicy) -> bool {
        spectral_norm(&self.residual_of(m)) <= tol.angle_tol() * scale
    }

    pub fn contains(&self, other: &Subspace, tol: &TolerancePolicy) -> bool {
        other.is_zero() || spectral_norm(&self.residual_of(&other.basis)) <= tol.angle_tol()
    }

    /// Sine of the largest principal angle, `‖P_U − P_V‖₂`; `1` when the
    /// dimensions differ.
    pub fn gap(&self, other: &Subspace) -> f64 {
        if self.ambient_dim() != other.ambient_dim() || self.dim() != other.dim() {
            return 1.0;
        }
        spectral_norm(&(self.projector() - other.projector()))
    }

    pub fn equals(&self, other: &Subspace, tol: &TolerancePolicy) -> bool {
        self.dim() == other.dim() && self.gap(other) <= tol.angle_tol()
    }

    pub fn sum(&self, other: &Subspace, tol: &TolerancePolicy) -> Result<Subspace> {
        subspace_sum(self, other, tol)
    }

    pub fn intersect(&self, other: &Subspace, tol: &TolerancePolicy) -> Result<Subspace> {
        subspace_intersect(self, other, tol)
    }

    /// Image of the subspace under `a`, with rank decided against `‖a‖₂`.
    pub fn mapped_by(&self, a: &Matrix, tol: &TolerancePolicy) -> Subspace {
        Subspace::span_scaled(&(a * &self.basis), spectral_norm(a), tol)
    }
}

fn check_ambient(u: &Subspace, v: &Subspace) -> Result<()> {
    if u.ambient_dim() != v.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "subspaces of R^{} and R^{}",
            u.ambient_dim(),
            v.ambient_dim()
        )));
    }
    Ok(())
}

// Both the sum and the intersection see a principal pair at angle θ as a
// singular value √2·sin(θ/2); the cutoff below makes them agree with the
// `sin θ ≤ √rank_rel` containment test.
fn merge_cutoff(tol: &TolerancePolicy) -> f64 {
    tol.angle_tol() / std::f64::consts::SQRT_2
}

/// Orthonormalized column concatenation.
pub fn subspace_sum(u: &Subspace, v: &Subspace, tol: &TolerancePolicy) -> Result<Subspace> {
    check_ambient(u, v)?;
    if u.is_zero() {
        return Ok(v.clone());
    }
    if v.is_zero() {
        return Ok(u.clone());
    }
    let joined = hstack(&u.basis, &v.basis);
    Ok(Subspace {
        basis: range_with_cutoff(&joined, merge_cutoff(tol)),
    })
}

/// Kernel of the stacked complement projectors `[I − P_U; I − P_V]`.
pub fn subspace_intersect(u: &Subspace, v: &Subspace, tol: &TolerancePolicy) -> Result<Subspace> {
    check_ambient(u, v)?;
    let n = u.ambient_dim();
    if u.is_zero() || v.is_zero() {
        return Ok(Subspace::zero(n));
    }
    let eye = Matrix::identity(n, n);
    let stacked = vstack(&(&eye - u.projector()), &(&eye - v.projector()));
    Ok(Subspace {
        basis: null_space_with_cutoff(&stacked, merge_cutoff(tol)),
    })
}

pub fn subspace_contains(u: &Subspace, v: &Subspace, tol: &TolerancePolicy) -> Result<bool> {
    check_ambient(u, v)?;
    Ok(u.contains(v, tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn e(n: usize, i: usize) -> Subspace {
        let mut b = Matrix::zeros(n, 1);
        b[(i, 0)] = 1.0;
        Subspace::from_orthonormal(b)
    }

    #[test]
    fn intersect_of_axes_is_zero() {
        let w = subspace_intersect(&e(2, 0), &e(2, 1), &tol()).unwrap();
        assert!(w.is_zero());
        assert_eq!(w.ambient_dim(), 2);
    }

    #[test]
    fn sum_of_axes_is_plane() {
        let s = subspace_sum(&e(3, 0), &e(3, 2), &tol()).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(s.orthonormality_defect() < 1e-14);
        assert!(s.contains(&e(3, 0), &tol()));
        assert!(!s.contains(&e(3, 1), &tol()));
    }

    #[test]
    fn whole_space_contains_everything() {
        let full = Subspace::full(3);
        assert!(full.contains(&e(3, 1), &tol()));
        assert!(full.contains(&Subspace::zero(3), &tol()));
        assert!(subspace_contains(&full, &full, &tol()).unwrap());
    }

    #[test]
    fn ambient_mismatch_is_an_error() {
        assert!(matches!(
            subspace_sum(&e(2, 0), &e(3, 0), &tol()),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(subspace_intersect(&e(2, 0), &e(3, 0), &tol()).is_err());
        assert!(subspace_contains(&e(2, 0), &e(3, 0), &tol()).is_err());
    }

    #[test]
    fn complement_round_trip() {
        let plane = subspace_sum(&e(3, 0), &e(3, 1), &tol()).unwrap();
        let c = plane.complement();
        assert_eq!(c.dim(), 1);
        assert!(c.equals(&e(3, 2), &tol()));
        assert_eq!(Subspace::zero(2).complement().dim(), 2);
        assert_eq!(Subspace::full(2).complement().dim(), 0);
    }

    #[test]
    fn gap_detects_tilt() {
        let tilted = Subspace::from_orthonormal(Matrix::from_column_slice(2, 1, &[1e-3f64.cos(), 1e-3f64.sin()]));
        let g = tilted.gap(&e(2, 0));
        assert!((g - 1e-3f64.sin()).abs() < 1e-12);
        assert!(!tilted.equals(&e(2, 0), &tol()));
        assert_eq!(e(2, 0).gap(&Subspace::full(2)), 1.0);
    }
}
