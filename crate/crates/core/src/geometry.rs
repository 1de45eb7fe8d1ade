//! Reachable and unobservable subspaces, output-nulling subspaces, friends,
//! and the reachability subspace attached to a Riccati solution.
//!
//! Feedback is written with a minus sign: `F` is a friend of `V` when
//! `(A − BF)V ⊆ V` and `(C − DF)V = 0`, so that `K_X` itself is the friend
//! produced by a solution `X`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{kernel_basis, null_space_with_cutoff, spectral_norm, vstack, Matrix, Subspace, TolerancePolicy};
use crate::popov::{x_quantities, PopovTriple};

/// State-space system `(A, B, C, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadruple {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
}

impl Quadruple {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = a.nrows();
        let (m, p) = (b.ncols(), c.nrows());
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.shape() != (p, m) {
            return Err(Error::DimensionMismatch(format!(
                "quadruple A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// `(A, B, C, D)` with `[C D]` the stored factor of the Popov matrix.
    pub fn from_triple(triple: &PopovTriple) -> Self {
        Self {
            a: triple.a().clone(),
            b: triple.b().clone(),
            c: triple.c().clone(),
            d: triple.d().clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    fn ac(&self) -> Matrix {
        vstack(&self.a, &self.c)
    }

    fn bd(&self) -> Matrix {
        vstack(&self.b, &self.d)
    }
}

fn check_square_pair(a: &Matrix, b: &Matrix, what: &str) -> Result<()> {
    if !a.is_square() || b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: A is {}x{}, other factor has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    Ok(())
}

fn check_ambient(v: &Subspace, n: usize) -> Result<()> {
    if v.ambient_dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "subspace of R^{} for a state space of dimension {n}",
            v.ambient_dim()
        )));
    }
    Ok(())
}

/// Smallest `a`-invariant subspace containing `start`.
pub fn invariant_closure(a: &Matrix, start: Subspace, tol: &TolerancePolicy) -> Result<Subspace> {
    check_ambient(&start, a.nrows())?;
    let mut w = start;
    while !w.is_zero() && w.dim() < w.ambient_dim() {
        let grown = w.sum(&w.mapped_by(a, tol), tol)?;
        if grown.dim() <= w.dim() {
            break;
        }
        w = grown;
    }
    Ok(w)
}

/// `im [B, AB, …, A^{n−1}B]`.
pub fn reachable_subspace(a: &Matrix, b: &Matrix, tol: &TolerancePolicy) -> Result<Subspace> {
    check_square_pair(a, b, "reachable subspace")?;
    invariant_closure(a, Subspace::span_scaled(b, spectral_norm(b), tol), tol)
}

/// Kernel of the observability matrix of `(A, C)`.
pub fn unobservable_subspace(a: &Matrix, c: &Matrix, tol: &TolerancePolicy) -> Result<Subspace> {
    if !a.is_square() || c.ncols() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "unobservable subspace: A is {}x{}, C is {}x{}",
            a.nrows(),
            a.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    Ok(reachable_subspace(&a.transpose(), &c.transpose(), tol)?.complement())
}

/// Orthogonal change of basis `T = [T₁ T₂]` with `im T₁` the reachable
/// subspace, and `Tᵀ A T`, `Tᵀ B` in the new coordinates.
#[derive(Debug, Clone)]
pub struct KalmanForm {
    pub t: Matrix,
    pub reachable_dim: usize,
    pub a_t: Matrix,
    pub b_t: Matrix,
}

impl KalmanForm {
    fn k(&self) -> usize {
        self.reachable_dim
    }

    fn rest(&self) -> usize {
        self.t.ncols() - self.reachable_dim
    }

    pub fn t1(&self) -> Matrix {
        self.t.columns(0, self.k()).into_owned()
    }

    pub fn t2(&self) -> Matrix {
        self.t.columns(self.k(), self.rest()).into_owned()
    }

    pub fn a11(&self) -> Matrix {
        self.a_t.view((0, 0), (self.k(), self.k())).into_owned()
    }

    pub fn a12(&self) -> Matrix {
        self.a_t.view((0, self.k()), (self.k(), self.rest())).into_owned()
    }

    pub fn a21(&self) -> Matrix {
        self.a_t.view((self.k(), 0), (self.rest(), self.k())).into_owned()
    }

    pub fn a22(&self) -> Matrix {
        self.a_t
            .view((self.k(), self.k()), (self.rest(), self.rest()))
            .into_owned()
    }

    pub fn b1(&self) -> Matrix {
        self.b_t.rows(0, self.k()).into_owned()
    }

    pub fn b2(&self) -> Matrix {
        self.b_t.rows(self.k(), self.rest()).into_owned()
    }
}

pub fn controllability_form(a: &Matrix, b: &Matrix, tol: &TolerancePolicy) -> Result<KalmanForm> {
    let reach = reachable_subspace(a, b, tol)?;
    let t = crate::numerics::hstack(reach.basis(), reach.complement().basis());
    let a_t = t.transpose() * a * &t;
    let b_t = t.transpose() * b;
    Ok(KalmanForm {
        t,
        reachable_dim: reach.dim(),
        a_t,
        b_t,
    })
}

// (V ⊕ 0_p) + im [B; D]
fn output_nulling_target(quad: &Quadruple, v: &Subspace, tol: &TolerancePolicy) -> Result<Subspace> {
    let lifted = Subspace::from_orthonormal(vstack(v.basis(), &Matrix::zeros(quad.p(), v.dim())));
    let bd = quad.bd();
    lifted.sum(&Subspace::span_scaled(&bd, spectral_norm(&bd), tol), tol)
}

/// `[A; C] V ⊆ (V ⊕ 0) + im [B; D]`.
pub fn is_output_nulling(quad: &Quadruple, v: &Subspace, tol: &TolerancePolicy) -> Result<bool> {
    check_ambient(v, quad.n())?;
    if v.is_zero() {
        return Ok(true);
    }
    let ac = quad.ac();
    let target = output_nulling_target(quad, v, tol)?;
    Ok(target.contains_columns_scaled(&(&ac * v.basis()), spectral_norm(&ac), tol))
}

/// `(A − BF)V ⊆ V` and `(C − DF)V = 0`.
pub fn is_friend(quad: &Quadruple, v: &Subspace, f: &Matrix, tol: &TolerancePolicy) -> Result<bool> {
    check_ambient(v, quad.n())?;
    if f.shape() != (quad.m(), quad.n()) {
        return Err(Error::DimensionMismatch(format!(
            "feedback must be {}x{}, got {}x{}",
            quad.m(),
            quad.n(),
            f.nrows(),
            f.ncols()
        )));
    }
    if v.is_zero() {
        return Ok(true);
    }
    let nf = spectral_norm(f);
    let state_scale = spectral_norm(&quad.a) + spectral_norm(&quad.b) * nf;
    let output_scale = spectral_norm(&quad.c) + spectral_norm(&quad.d) * nf;
    let closed = (&quad.a - &quad.b * f) * v.basis();
    let output = (&quad.c - &quad.d * f) * v.basis();
    Ok(
        v.contains_columns_scaled(&closed, state_scale, tol)
            && spectral_norm(&output) <= tol.angle_tol() * output_scale,
    )
}

/// `V*` together with the dimensions of the recursion `V₀ ⊇ V₁ ⊇ …`.
#[derive(Debug, Clone)]
pub struct OutputNullingChain {
    pub subspace: Subspace,
    pub dims: Vec<usize>,
}

pub fn largest_output_nulling(quad: &Quadruple, tol: &TolerancePolicy) -> Result<Subspace> {
    Ok(largest_output_nulling_chain(quad, tol)?.subspace)
}

pub fn largest_output_nulling_chain(quad: &Quadruple, tol: &TolerancePolicy) -> Result<OutputNullingChain> {
    let n = quad.n();
    let ac = quad.ac();
    let scale = spectral_norm(&ac);
    let mut v = Subspace::full(n);
    let mut dims = vec![n];
    if scale == 0.0 {
        return Ok(OutputNullingChain { subspace: v, dims });
    }
    let eye = Matrix::identity(n, n);
    while !v.is_zero() {
        let target = output_nulling_target(quad, &v, tol)?;
        let defect = target.residual_of(&ac) / scale;
        let stacked = vstack(&defect, &(&eye - v.projector()));
        let next = Subspace::from_orthonormal(null_space_with_cutoff(&stacked, tol.angle_tol()));
        if next.dim() >= v.dim() {
            break;
        }
        v = next;
        dims.push(v.dim());
    }
    Ok(OutputNullingChain { subspace: v, dims })
}

fn reach_with_friend(quad: &Quadruple, v: &Subspace, f: &Matrix, tol: &TolerancePolicy) -> Result<Subspace> {
    let ker_d = kernel_basis(&quad.d, tol);
    let b_ker_d = Subspace::span_scaled(&(&quad.b * ker_d.basis()), spectral_norm(&quad.b), tol);
    let seed = v.intersect(&b_ker_d, tol)?;
    invariant_closure(&(&quad.a - &quad.b * f), seed, tol)
}

/// Another friend of `V`, `F + Δ`, drawn from a seeded generator; `None`
/// when `F` is the only friend.
pub fn alternate_friend(
    quad: &Quadruple,
    v: &Subspace,
    f: &Matrix,
    seed: u64,
    tol: &TolerancePolicy,
) -> Result<Option<Matrix>> {
    let (n, m) = (quad.n(), quad.m());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = |rows: usize, cols: usize| Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));

    let off_v = Matrix::identity(n, n) - v.projector();
    let admissible = kernel_basis(&vstack(&(&off_v * &quad.b), &quad.d), tol);
    let mut delta = random(m, n) * &off_v;
    if !admissible.is_zero() && !v.is_zero() {
        delta += admissible.basis() * random(admissible.dim(), v.dim()) * v.basis().transpose();
    }
    if spectral_norm(&delta) == 0.0 {
        return Ok(None);
    }
    let candidate = f + delta * (1.0 + spectral_norm(f));
    Ok(is_friend(quad, v, &candidate, tol)?.then_some(candidate))
}

/// Gap between the reachability subspaces computed with `f` and with a
/// seeded alternate friend.
pub fn friend_independence_gap(
    quad: &Quadruple,
    v: &Subspace,
    f: &Matrix,
    seed: u64,
    tol: &TolerancePolicy,
) -> Result<Option<f64>> {
    let Some(other) = alternate_friend(quad, v, f, seed, tol)? else {
        return Ok(None);
    };
    let r1 = reach_with_friend(quad, v, f, tol)?;
    let r2 = reach_with_friend(quad, v, &other, tol)?;
    Ok(Some(r1.gap(&r2)))
}

const FRIEND_CHECK_SEED: u64 = 0x0f12_1e4d;

/// Smallest `(A − BF)`-invariant subspace containing `V ∩ B ker D`.
///
/// The result is recomputed with a second friend and the two must agree.
pub fn reachability_on(quad: &Quadruple, v: &Subspace, f: &Matrix, tol: &TolerancePolicy) -> Result<Subspace> {
    if !is_output_nulling(quad, v, tol)? {
        return Err(Error::NotOutputNulling);
    }
    if !is_friend(quad, v, f, tol)? {
        return Err(Error::NotAFriend);
    }
    let reach = reach_with_friend(quad, v, f, tol)?;
    if let Some(other) = alternate_friend(quad, v, f, FRIEND_CHECK_SEED, tol)? {
        let again = reach_with_friend(quad, v, &other, tol)?;
        if !reach.equals(&again, tol) {
            return Err(Error::NumericalInconsistency(format!(
                "reachability subspace depends on the friend (gap {:.3e})",
                reach.gap(&again)
            )));
        }
    }
    Ok(reach)
}

/// Reachable subspace of `(A_X, B G_X)`.
pub fn r0(triple: &PopovTriple, x: &Matrix, tol: &TolerancePolicy) -> Result<Subspace> {
    let xq = x_quantities(triple, x, tol)?;
    let start = Subspace::span_scaled(&(triple.b() * &xq.ker_r_x), spectral_norm(triple.b()), tol);
    invariant_closure(&xq.a_x, start, tol)
}

/// Matrix of `A|_V` in the stored basis of `V`.
pub fn restriction(a: &Matrix, v: &Subspace, tol: &TolerancePolicy) -> Result<Matrix> {
    check_ambient(v, a.nrows())?;
    let image = a * v.basis();
    if !v.contains_columns_scaled(&image, spectral_norm(a), tol) {
        return Err(Error::NotInvariant);
    }
    Ok(v.basis().transpose() * image)
}

/// `ker X` decided at the subspace level (`σ ≤ √rank_rel · ‖X‖₂`), which
/// tolerates the residual error of an iterated solution.
pub fn kernel_of_solution(x: &Matrix, tol: &TolerancePolicy) -> Subspace {
    let scale = spectral_norm(x);
    if scale == 0.0 {
        return Subspace::full(x.ncols());
    }
    Subspace::from_orthonormal(null_space_with_cutoff(x, tol.angle_tol() * scale))
}

/// `ker R_X` against `ker(XB) ∩ ker R`.
#[derive(Debug, Clone)]
pub struct KernelIdentity {
    pub ker_r_x: Subspace,
    pub ker_xb_and_r: Subspace,
    pub holds: bool,
}

pub fn kernel_identity(triple: &PopovTriple, x: &Matrix, tol: &TolerancePolicy) -> Result<KernelIdentity> {
    let xq = x_quantities(triple, x, tol)?;
    let ker_r_x = Subspace::from_orthonormal(xq.ker_r_x.clone());
    let stacked = vstack(&(x * triple.b()), triple.r());
    let scale = spectral_norm(&stacked);
    let ker_xb_and_r = if scale == 0.0 {
        Subspace::full(triple.m())
    } else {
        Subspace::from_orthonormal(null_space_with_cutoff(&stacked, tol.angle_tol() * scale))
    };
    let holds = ker_r_x.equals(&ker_xb_and_r, tol);
    Ok(KernelIdentity {
        ker_r_x,
        ker_xb_and_r,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, data)
    }

    fn e(n: usize, i: usize) -> Subspace {
        let mut b = Matrix::zeros(n, 1);
        b[(i, 0)] = 1.0;
        Subspace::from_orthonormal(b)
    }

    fn free_quad() -> Quadruple {
        Quadruple::from_triple(&fixtures::free_subspace_triple().unwrap())
    }

    #[test]
    fn reachable_examples() {
        let r = reachable_subspace(
            &m(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            &m(2, 2, &[1.0, -1.0, 0.0, 0.0]),
            &tol(),
        )
        .unwrap();
        assert!(r.equals(&e(2, 0), &tol()));
        let z = reachable_subspace(&Matrix::identity(3, 3), &Matrix::zeros(3, 2), &tol()).unwrap();
        assert!(z.is_zero());
        let shift = m(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let full = reachable_subspace(&shift, &m(3, 1, &[0.0, 0.0, 1.0]), &tol()).unwrap();
        assert_eq!(full.dim(), 3);
    }

    #[test]
    fn unobservable_examples() {
        let (a, q) = fixtures::stein_family_data();
        let u = unobservable_subspace(&a, &q, &tol()).unwrap();
        assert!(u.equals(&e(2, 1), &tol()));
        assert!(unobservable_subspace(&a, &Matrix::identity(2, 2), &tol())
            .unwrap()
            .is_zero());
        assert_eq!(
            unobservable_subspace(&a, &Matrix::zeros(1, 2), &tol()).unwrap().dim(),
            2
        );
    }

    #[test]
    fn kalman_form_examples() {
        let t = fixtures::free_subspace_triple().unwrap();
        let xq = x_quantities(&t, &fixtures::free_subspace_solution(), &tol()).unwrap();
        let k = controllability_form(&xq.a_x, &(t.b() * &xq.g_x), &tol()).unwrap();
        assert_eq!(k.reachable_dim, 1);
        assert_relative_eq!(k.a11()[(0, 0)], 1.0, epsilon = 1e-14);
        assert!(k.a21().norm() < 1e-14);
        assert!(k.b2().norm() < 1e-14);
        assert!((&k.t * k.t.transpose() - Matrix::identity(2, 2)).norm() < 1e-14);

        let none = controllability_form(&xq.a_x, &Matrix::zeros(2, 1), &tol()).unwrap();
        assert_eq!(none.reachable_dim, 0);
        assert_eq!(none.a11().shape(), (0, 0));
    }

    #[test]
    fn output_nulling_examples() {
        let q = free_quad();
        assert!(is_output_nulling(&q, &e(2, 0), &tol()).unwrap());
        assert!(is_output_nulling(&q, &Subspace::zero(2), &tol()).unwrap());
        assert!(!is_output_nulling(&q, &e(2, 1), &tol()).unwrap());
        let observed = Quadruple::new(
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
        )
        .unwrap();
        assert!(!is_output_nulling(&observed, &Subspace::full(2), &tol()).unwrap());
    }

    #[test]
    fn friend_examples() {
        let t = fixtures::free_subspace_triple().unwrap();
        let xq = x_quantities(&t, &fixtures::free_subspace_solution(), &tol()).unwrap();
        let q = free_quad();
        assert!(is_friend(&q, &e(2, 0), &xq.k_x, &tol()).unwrap());
        assert!(is_friend(&q, &Subspace::zero(2), &m(2, 2, &[5.0, 1.0, 2.0, 3.0]), &tol()).unwrap());
        assert!(!is_friend(&q, &e(2, 0), &m(2, 2, &[0.0, 0.0, 3.0, 0.0]), &tol()).unwrap());
    }

    #[test]
    fn largest_output_nulling_examples() {
        let chain = largest_output_nulling_chain(&free_quad(), &tol()).unwrap();
        assert!(chain.subspace.equals(&e(2, 0), &tol()));
        assert!(chain.dims.windows(2).all(|w| w[1] <= w[0]));
        assert!(chain.dims.len() <= 3);

        let silent = Quadruple::new(
            m(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            Matrix::zeros(2, 1),
            Matrix::zeros(1, 2),
            Matrix::zeros(1, 1),
        )
        .unwrap();
        assert_eq!(largest_output_nulling(&silent, &tol()).unwrap().dim(), 2);

        let observed = Quadruple::new(
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
        )
        .unwrap();
        assert!(largest_output_nulling(&observed, &tol()).unwrap().is_zero());
    }

    #[test]
    fn reachability_on_examples() {
        let t = fixtures::free_subspace_triple().unwrap();
        let xq = x_quantities(&t, &fixtures::free_subspace_solution(), &tol()).unwrap();
        let q = free_quad();
        let r = reachability_on(&q, &e(2, 0), &xq.k_x, &tol()).unwrap();
        assert!(r.equals(&e(2, 0), &tol()));
        assert!(reachability_on(&q, &Subspace::zero(2), &xq.k_x, &tol())
            .unwrap()
            .is_zero());
        assert_eq!(
            reachability_on(&q, &e(2, 1), &xq.k_x, &tol()).unwrap_err(),
            Error::NotOutputNulling
        );
        assert_eq!(
            reachability_on(&q, &e(2, 0), &m(2, 2, &[0.0, 0.0, 3.0, 0.0]), &tol()).unwrap_err(),
            Error::NotAFriend
        );
        let gap = friend_independence_gap(&q, &e(2, 0), &xq.k_x, 7, &tol())
            .unwrap()
            .unwrap();
        assert!(gap <= 1e-8);

        // injective D: nothing reachable with zero output
        let inj = Quadruple::new(
            Matrix::identity(2, 2),
            Matrix::identity(2, 1),
            Matrix::zeros(1, 2),
            Matrix::identity(1, 1),
        )
        .unwrap();
        let all = Subspace::full(2);
        assert!(reachability_on(&inj, &all, &Matrix::zeros(1, 2), &tol())
            .unwrap()
            .is_zero());
    }

    #[test]
    fn r0_examples() {
        let t = fixtures::free_subspace_triple().unwrap();
        let x = fixtures::free_subspace_solution();
        let r = r0(&t, &x, &tol()).unwrap();
        assert!(r.equals(&e(2, 0), &tol()));
        assert!((&x * r.basis()).norm() < 1e-14);

        let s = fixtures::scalar_triple().unwrap();
        assert!(r0(&s, &m(1, 1, &[fixtures::scalar_solution()]), &tol())
            .unwrap()
            .is_zero());
    }

    #[test]
    fn restriction_examples() {
        let a = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(restriction(&a, &e(2, 0), &tol()).unwrap()[(0, 0)], 1.0);
        let full = restriction(&a, &Subspace::full(2), &tol()).unwrap();
        assert_relative_eq!(full, a.clone());
        let eye = restriction(&Matrix::identity(3, 3), &e(3, 2), &tol()).unwrap();
        assert_relative_eq!(eye, Matrix::identity(1, 1));
        let tilted = m(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(restriction(&tilted, &e(2, 0), &tol()).unwrap_err(), Error::NotInvariant);
    }

    #[test]
    fn kernel_identity_examples() {
        let t = fixtures::free_subspace_triple().unwrap();
        let ok = kernel_identity(&t, &fixtures::free_subspace_solution(), &tol()).unwrap();
        assert!(ok.holds);

        let g = fixtures::gdare_only_triple().unwrap();
        let bad = kernel_identity(&g, &fixtures::gdare_only_solution(), &tol()).unwrap();
        assert!(!bad.holds);
        assert!(bad.ker_r_x.equals(&e(2, 0), &tol()));
        assert!(bad.ker_xb_and_r.is_zero());
    }

    #[test]
    fn solution_kernel() {
        let k = kernel_of_solution(&fixtures::free_subspace_solution(), &tol());
        assert!(k.equals(&e(2, 0), &tol()));
        assert_eq!(kernel_of_solution(&Matrix::zeros(2, 2), &tol()).dim(), 2);
    }
}
