//! Small reference problems with known answers, shared by tests and the CLI.

pub mod random;

use crate::error::Result;
use crate::numerics::{Matrix, TolerancePolicy};
use crate::popov::PopovTriple;

/// Unvalidated triple data.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTriple {
    pub a: Matrix,
    pub b: Matrix,
    pub q: Matrix,
    pub r: Matrix,
    pub s: Matrix,
}

impl RawTriple {
    pub fn validate(self, tol: &TolerancePolicy) -> Result<PopovTriple> {
        PopovTriple::new(self.a, self.b, self.q, self.r, self.s, tol)
    }
}

fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
    Matrix::from_row_slice(rows, cols, data)
}

/// Singular `R` with a one-dimensional free input subspace on the optimum.
pub fn free_subspace_data() -> RawTriple {
    RawTriple {
        a: m(2, 2, &[1.0, 1.0, 0.0, 1.0]),
        b: m(2, 2, &[2.0, 0.0, 1.0, 1.0]),
        q: m(2, 2, &[0.0, 0.0, 0.0, 1.0]),
        r: Matrix::zeros(2, 2),
        s: Matrix::zeros(2, 2),
    }
}

pub fn free_subspace_triple() -> Result<PopovTriple> {
    free_subspace_data().validate(&TolerancePolicy::default())
}

/// `diag(0, 1)`, the unique solution for [`free_subspace_data`].
pub fn free_subspace_solution() -> Matrix {
    m(2, 2, &[0.0, 0.0, 0.0, 1.0])
}

/// Output map `C = [0 1]`, `D = [4 0]`.
pub fn gdare_only_output_map() -> (Matrix, Matrix, Matrix, Matrix) {
    (
        m(2, 2, &[-1.0, 0.0, -5.0, -6.0]),
        m(2, 2, &[-4.0, 0.0, 0.0, -2.0]),
        m(1, 2, &[0.0, 1.0]),
        m(1, 2, &[4.0, 0.0]),
    )
}

/// Triple with a GDARE solution that violates the kernel condition.
pub fn gdare_only_triple() -> Result<PopovTriple> {
    let (a, b, c, d) = gdare_only_output_map();
    PopovTriple::from_output_map(a, b, c, d, &TolerancePolicy::default())
}

/// `diag(−1, 1)`
pub fn gdare_only_solution() -> Matrix {
    m(2, 2, &[-1.0, 0.0, 0.0, 1.0])
}

/// Data whose Popov matrix is indefinite; must be rejected.
pub fn indefinite_popov_data() -> RawTriple {
    RawTriple {
        a: m(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        b: m(2, 2, &[0.0, 1.0, 0.0, 1.0]),
        q: m(2, 2, &[1.0, 0.0, 0.0, -1.0]),
        r: m(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        s: Matrix::zeros(2, 2),
    }
}

/// Stein data `A = [[1,0],[1,1]]`, `Q = diag(1, 0)` with a one-parameter family
/// of symmetric solutions.
pub fn stein_family_data() -> (Matrix, Matrix) {
    (m(2, 2, &[1.0, 0.0, 1.0, 1.0]), m(2, 2, &[1.0, 0.0, 0.0, 0.0]))
}

/// Scalar problem `a = 1/2, b = 1, q = 1, r = 1, s = 0`.
pub fn scalar_triple() -> Result<PopovTriple> {
    PopovTriple::new(
        m(1, 1, &[0.5]),
        m(1, 1, &[1.0]),
        m(1, 1, &[1.0]),
        m(1, 1, &[1.0]),
        m(1, 1, &[0.0]),
        &TolerancePolicy::default(),
    )
}

/// Positive root of `x² − x/4 − 1 = 0`.
pub fn scalar_solution() -> f64 {
    (1.0 + 65f64.sqrt()) / 8.0
}
