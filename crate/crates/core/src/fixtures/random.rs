//! Seeded generators of random problems with known structure.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::{symmetrize, Matrix, TolerancePolicy};
use crate::popov::PopovTriple;
use crate::stein::stein_solve;

pub type TestRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[−1, 1]`.
pub fn uniform_matrix(rng: &mut TestRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

pub fn uniform_vector(rng: &mut TestRng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.random_range(-1.0..=1.0))
}

pub fn symmetric(rng: &mut TestRng, n: usize) -> Matrix {
    symmetrize(&uniform_matrix(rng, n, n))
}

/// `FᵀF` with `F` of size `rank × n`.
pub fn psd(rng: &mut TestRng, n: usize, rank: usize) -> Matrix {
    let f = uniform_matrix(rng, rank, n);
    symmetrize(&(f.transpose() * f))
}

/// Orthogonal factor of a QR decomposition of a random matrix.
pub fn orthogonal(rng: &mut TestRng, n: usize) -> Matrix {
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let qr = uniform_matrix(rng, n, n).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random square matrix rescaled to spectral radius `rho`.
pub fn with_spectral_radius(rng: &mut TestRng, n: usize, rho: f64) -> Matrix {
    let a = uniform_matrix(rng, n, n);
    let current = a.complex_eigenvalues().iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if current == 0.0 {
        a
    } else {
        a * (rho / current)
    }
}

/// Generic triple from a random output map with nonsingular `R`.
pub fn regular_triple(rng: &mut TestRng, n: usize, m: usize) -> PopovTriple {
    let rho = rng.random_range(0.3..1.4);
    let a = with_spectral_radius(rng, n, rho);
    let b = uniform_matrix(rng, n, m);
    let p = m + rng.random_range(0..=n);
    let c = uniform_matrix(rng, p, n);
    let d = uniform_matrix(rng, p, m);
    PopovTriple::from_output_map(a, b, c, d, &TolerancePolicy::default()).expect("output map gives a PSD Popov matrix")
}

/// Triple whose state splits into a cost-free block driven by cost-free
/// inputs and a regular block, hidden by orthogonal changes of state and
/// input coordinates.
#[derive(Debug, Clone)]
pub struct StructuredProblem {
    pub triple: PopovTriple,
    /// Dimension of the cost-free state block.
    pub free_states: usize,
    /// Number of cost-free inputs.
    pub free_inputs: usize,
    /// State change of basis: original coordinates are `U x`.
    pub u: Matrix,
}

pub fn structured_triple(rng: &mut TestRng) -> StructuredProblem {
    let k = rng.random_range(1..=2);
    let n2 = rng.random_range(1..=3);
    let m1 = rng.random_range(1..=2);
    let m2 = rng.random_range(1..=2);
    let (n, m) = (k + n2, m1 + m2);
    let mut a = Matrix::zeros(n, n);
    a.view_mut((0, 0), (k, k)).copy_from(&uniform_matrix(rng, k, k));
    a.view_mut((0, k), (k, n2)).copy_from(&uniform_matrix(rng, k, n2));
    let rho = rng.random_range(0.3..1.3);
    a.view_mut((k, k), (n2, n2))
        .copy_from(&with_spectral_radius(rng, n2, rho));
    let mut b = Matrix::zeros(n, m);
    b.view_mut((0, 0), (k, m1)).copy_from(&uniform_matrix(rng, k, m1));
    b.view_mut((0, m1), (k, m2)).copy_from(&uniform_matrix(rng, k, m2));
    b.view_mut((k, m1), (n2, m2)).copy_from(&uniform_matrix(rng, n2, m2));
    let p = n2 + m2;
    let mut c = Matrix::zeros(p, n);
    c.view_mut((0, k), (p, n2)).copy_from(&uniform_matrix(rng, p, n2));
    let mut d = Matrix::zeros(p, m);
    d.view_mut((0, m1), (p, m2)).copy_from(&uniform_matrix(rng, p, m2));

    let u = orthogonal(rng, n);
    let v = orthogonal(rng, m);
    let triple = PopovTriple::from_output_map(
        u.transpose() * &a * &u,
        u.transpose() * &b * &v,
        &c * &u,
        &d * &v,
        &TolerancePolicy::default(),
    )
    .expect("output map gives a PSD Popov matrix");
    StructuredProblem {
        triple,
        free_states: k,
        free_inputs: m1,
        u,
    }
}

/// The singular-`R` reference problem in random orthogonal coordinates,
/// with its minimal solution.
pub fn rotated_free_subspace(rng: &mut TestRng) -> (PopovTriple, Matrix) {
    let raw = super::free_subspace_data();
    let u = orthogonal(rng, 2);
    let v = orthogonal(rng, 2);
    let triple = PopovTriple::new(
        u.transpose() * &raw.a * &u,
        u.transpose() * &raw.b * &v,
        symmetrize(&(u.transpose() * &raw.q * &u)),
        symmetrize(&(v.transpose() * &raw.r * &v)),
        u.transpose() * &raw.s * &v,
        &TolerancePolicy::default(),
    )
    .expect("rotation keeps the Popov matrix PSD");
    let x = symmetrize(&(u.transpose() * super::free_subspace_solution() * &u));
    (triple, x)
}

/// Triple with a continuum of CGDARE solutions.
///
/// A cost-free block `x₁` is driven by a cost-free input; the block `x₂` has
/// no input and a mixed dynamics matrix, so every symmetric solution of its
/// Stein equation extends to a CGDARE solution `diag(0, X₂₂)`.
#[derive(Debug, Clone)]
pub struct SolutionFamily {
    pub triple: PopovTriple,
    pub solutions: Vec<Matrix>,
    pub free_states: usize,
}

pub fn stein_shift_family(rng: &mut TestRng, count: usize) -> SolutionFamily {
    let k = rng.random_range(1..=2);
    let (a22, q22) = super::stein_family_data();
    let n = k + 2;
    let m = rng.random_range(1..=2);
    let mut a = Matrix::zeros(n, n);
    a.view_mut((0, 0), (k, k)).copy_from(&uniform_matrix(rng, k, k));
    a.view_mut((0, k), (k, 2)).copy_from(&uniform_matrix(rng, k, 2));
    a.view_mut((k, k), (2, 2)).copy_from(&a22);
    let mut b = Matrix::zeros(n, m);
    b.view_mut((0, 0), (k, m)).copy_from(&uniform_matrix(rng, k, m));
    let mut q = Matrix::zeros(n, n);
    q.view_mut((k, k), (2, 2)).copy_from(&q22);

    let family = stein_solve(&a22, &q22, &TolerancePolicy::default()).expect("valid Stein data");
    let u = orthogonal(rng, n);
    let lift = |x22: &Matrix| {
        let mut x = Matrix::zeros(n, n);
        x.view_mut((k, k), (2, 2)).copy_from(x22);
        symmetrize(&(u.transpose() * x * &u))
    };
    let solutions = (0..count)
        .map(|_| {
            let alpha = rng.random_range(-10.0..10.0);
            lift(&family.member(&[alpha]).expect("one-parameter family"))
        })
        .collect();
    let triple = PopovTriple::new(
        u.transpose() * &a * &u,
        u.transpose() * &b,
        symmetrize(&(u.transpose() * q * &u)),
        Matrix::zeros(m, m),
        Matrix::zeros(n, m),
        &TolerancePolicy::default(),
    )
    .expect("PSD Popov matrix");
    SolutionFamily {
        triple,
        solutions,
        free_states: k,
    }
}
