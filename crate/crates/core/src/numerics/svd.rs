//! Singular value decompositions backed by `faer`.

use nalgebra::{Complex, DMatrix};

use super::Matrix;

/// Full decomposition `M = U Σ Vᵀ` with `U`, `V` square orthogonal and
/// singular values in nonincreasing order.
#[derive(Debug, Clone)]
pub struct FullSvd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl FullSvd {
    pub fn new(m: &Matrix) -> Self {
        let (rows, cols) = m.shape();
        if rows == 0 || cols == 0 {
            return Self {
                u: Matrix::identity(rows, rows),
                singular_values: Vec::new(),
                v: Matrix::identity(cols, cols),
            };
        }
        let svd = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)])
            .svd()
            .expect("SVD iteration converges for finite input");
        let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
        Self {
            u: Matrix::from_fn(rows, rows, |i, j| u[(i, j)]),
            singular_values: (0..rows.min(cols)).map(|k| s[k]).collect(),
            v: Matrix::from_fn(cols, cols, |i, j| v[(i, j)]),
        }
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `cutoff`.
    pub fn rank_above(&self, cutoff: f64) -> usize {
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }

    /// Columns of `V` beyond the first `rank`: a basis of the null space
    /// at that rank.
    pub fn trailing_v(&self, rank: usize) -> Matrix {
        let cols = self.v.ncols();
        self.v.columns(rank, cols - rank).into_owned()
    }

    pub fn leading_u(&self, rank: usize) -> Matrix {
        self.u.columns(0, rank).into_owned()
    }

    /// Minimum-norm least-squares solution of `M x = b`, discarding
    /// singular values at or below `cutoff`.
    pub fn solve(&self, b: &nalgebra::DVector<f64>, cutoff: f64) -> nalgebra::DVector<f64> {
        let mut x = nalgebra::DVector::zeros(self.v.nrows());
        for (k, &s) in self.singular_values.iter().enumerate() {
            if s > cutoff {
                let coeff = self.u.column(k).dot(b) / s;
                x += self.v.column(k) * coeff;
            }
        }
        x
    }
}

/// Singular values of a real matrix in nonincreasing order.
pub fn real_singular_values(m: &Matrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
        .singular_values()
        .expect("SVD iteration converges for finite input")
}

/// Singular values of a complex matrix in nonincreasing order.
pub fn complex_singular_values(m: &DMatrix<Complex<f64>>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    faer::Mat::<faer::c64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
        .singular_values()
        .expect("SVD iteration converges for finite input")
}
