//! Eigenvalue assignment through the free part `G_X v` of the optimal control.
//!
//! With `u = −K_X x + G_X L x` the closed loop is `A_X + B G_X L`. Only the
//! part of the state in `R₀` (the reachable subspace of `(A_X, B G_X)`) is
//! affected, so the spectrum of `A_X` on `R₀` can be moved while the optimal
//! cost stays the same.

use nalgebra::{Complex, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{r0, restriction};
use crate::numerics::{rank_svd, spectral_norm, Matrix, TolerancePolicy};
use crate::popov::{x_quantities, PopovTriple, XQuantities};
use crate::riccati::{optimal_cost, TRAJECTORY_CAP};
use crate::spectral::C64;

/// Largest allowed relative gap between requested and achieved
/// characteristic polynomial coefficients.
pub const PLACEMENT_TOLERANCE: f64 = 1e-6;

/// Attempts with fresh random input combinations before giving up.
pub const PLACEMENT_ATTEMPTS: usize = 32;

/// Steps allowed when the horizon is chosen automatically.
pub const MAX_AUTO_HORIZON: usize = 100_000;

/// Eigenvalues sorted by real part, then imaginary part.
pub fn eigenvalues_sorted(m: &Matrix) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<C64> = m.complex_eigenvalues().iter().copied().collect();
    sort_spectrum(&mut ev);
    ev
}

pub fn sort_spectrum(ev: &mut [C64]) {
    ev.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Largest distance in an optimal greedy pairing of two multisets of equal size.
pub fn spectrum_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut unused: Vec<C64> = b.to_vec();
    let mut worst = 0.0f64;
    for x in a {
        let (pos, d) = unused.iter().enumerate().map(|(i, y)| (i, (x - y).norm())).fold(
            (usize::MAX, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        );
        worst = worst.max(d);
        unused.swap_remove(pos);
    }
    worst
}

/// Largest coefficient gap between the monic polynomials with roots `a` and `b`,
/// relative to `(1 + scale)^j` for the coefficient of `s^{k−j}`.
///
/// Coefficients stay well conditioned for repeated roots, where the roots
/// themselves are only accurate to `ε^{1/multiplicity}`.
pub fn char_poly_distance(a: &[C64], b: &[C64], scale: f64) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let (pa, pb) = (char_poly(a), char_poly(b));
    let k = a.len();
    (0..k)
        .map(|i| (pa[i] - pb[i]).abs() / (1.0 + scale).powi((k - i) as i32))
        .fold(0.0, f64::max)
}

struct R0Coordinates {
    xq: XQuantities,
    t1: Matrix,
    t2: Matrix,
}

fn r0_coordinates(triple: &PopovTriple, x: &Matrix, tol: &TolerancePolicy) -> Result<R0Coordinates> {
    let xq = x_quantities(triple, x, tol)?;
    let reach = r0(triple, x, tol)?;
    let t1 = reach.basis().clone();
    let t2 = reach.complement().basis().clone();
    Ok(R0Coordinates { xq, t1, t2 })
}

/// Spectrum of `A_X` restricted to `R₀`.
pub fn fixed_spectrum(triple: &PopovTriple, x: &Matrix, tol: &TolerancePolicy) -> Result<Vec<C64>> {
    let xq = x_quantities(triple, x, tol)?;
    let reach = r0(triple, x, tol)?;
    Ok(eigenvalues_sorted(&restriction(&xq.a_x, &reach, tol)?))
}

/// Spectrum of the map induced by `A_X` on the quotient by `R₀`.
pub fn off_r0_spectrum(triple: &PopovTriple, x: &Matrix, tol: &TolerancePolicy) -> Result<Vec<C64>> {
    let c = r0_coordinates(triple, x, tol)?;
    Ok(eigenvalues_sorted(&(c.t2.transpose() * &c.xq.a_x * &c.t2)))
}

#[derive(Debug, Clone)]
pub struct StabilizationResult {
    /// Lies in `im G_X`, vanishes on the orthogonal complement of `R₀`.
    pub l: Matrix,
    /// `A_X + B G_X L`
    pub a_cl: Matrix,
    /// Achieved spectrum on `R₀`, sorted.
    pub placed_poles: Vec<C64>,
    /// Spectrum of `A_X` on `R₀` before placement.
    pub fixed_poles: Vec<C64>,
    /// Every placed pole lies strictly inside the unit circle.
    pub fixed_poles_removed: bool,
    /// Spectrum off `R₀`, unchanged by `L`.
    pub off_r0_spectrum: Vec<C64>,
    pub r0_dim: usize,
}

fn check_desired(desired: &[C64], expected: usize) -> Result<()> {
    if desired.len() != expected {
        return Err(Error::DesiredSetSizeMismatch {
            expected,
            found: desired.len(),
        });
    }
    if desired.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ConjugationViolation);
    }
    let mut unmatched: Vec<C64> = desired.iter().copied().filter(|z| z.im != 0.0).collect();
    while let Some(z) = unmatched.pop() {
        let slack = 1e-9 * (1.0 + z.norm());
        match unmatched.iter().position(|w| (w - z.conj()).norm() <= slack) {
            Some(i) => {
                unmatched.swap_remove(i);
            }
            None => return Err(Error::ConjugationViolation),
        }
    }
    Ok(())
}

/// Real coefficients `c₀..c_{k−1}` of `∏(s − λᵢ) = s^k + c_{k−1}s^{k−1} + … + c₀`.
fn char_poly(roots: &[C64]) -> Vec<f64> {
    let mut coeffs = vec![Complex::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * r;
        }
        coeffs = next;
    }
    coeffs[..roots.len()].iter().map(|c| c.re).collect()
}

/// Ackermann gain `k` with `spec(A + b kᵀ) = roots`; `None` when `(A, b)` is
/// numerically uncontrollable.
fn ackermann(a: &Matrix, b: &DVector<f64>, roots: &[C64], tol: &TolerancePolicy) -> Option<DVector<f64>> {
    let k = a.nrows();
    let mut ctrb = Matrix::zeros(k, k);
    let mut col = b.clone();
    for j in 0..k {
        ctrb.set_column(j, &col);
        col = a * col;
    }
    if rank_svd(&ctrb, tol) < k {
        return None;
    }
    let coeffs = char_poly(roots);
    // Horner: p(A) = A^k + c_{k−1}A^{k−1} + … + c₀I
    let mut p = Matrix::identity(k, k);
    for c in coeffs.iter().rev() {
        p = a * p + Matrix::identity(k, k) * *c;
    }
    let mut e_last = DVector::zeros(k);
    e_last[k - 1] = 1.0;
    let y = ctrb.transpose().lu().solve(&e_last)?;
    Some(-(p.transpose() * y))
}

/// `L` placing the spectrum of the closed loop on `R₀` at `desired`.
pub fn place_on_r0(
    triple: &PopovTriple,
    x: &Matrix,
    desired: &[C64],
    seed: u64,
    tol: &TolerancePolicy,
) -> Result<StabilizationResult> {
    let coords = r0_coordinates(triple, x, tol)?;
    let (n, m) = (triple.n(), triple.m());
    let k = coords.t1.ncols();
    check_desired(desired, k)?;
    let xq = &coords.xq;
    let bg = triple.b() * &xq.g_x;
    let fixed_poles = eigenvalues_sorted(&(coords.t1.transpose() * &xq.a_x * &coords.t1));
    let off_r0_spectrum = eigenvalues_sorted(&(coords.t2.transpose() * &xq.a_x * &coords.t2));

    let l = if k == 0 {
        Matrix::zeros(m, n)
    } else {
        let a11 = coords.t1.transpose() * &xq.a_x * &coords.t1;
        let b1 = coords.t1.transpose() * &bg;
        let gain = place_block(&a11, &b1, desired, seed, tol)?;
        &xq.g_x * gain * coords.t1.transpose()
    };

    let a_cl = &xq.a_x + &bg * &l;
    let on_r0 = coords.t1.transpose() * &a_cl * &coords.t1;
    let placed_poles = eigenvalues_sorted(&on_r0);
    if char_poly_distance(&placed_poles, desired, spectral_norm(&on_r0)) > PLACEMENT_TOLERANCE {
        return Err(Error::PlacementFailed(format!(
            "achieved poles {placed_poles:?} differ from the request"
        )));
    }
    let fixed_poles_removed = placed_poles.iter().all(|z| z.norm() < 1.0);
    Ok(StabilizationResult {
        l,
        a_cl,
        placed_poles,
        fixed_poles,
        fixed_poles_removed,
        off_r0_spectrum,
        r0_dim: k,
    })
}

/// Gain `M` with `spec(A₁₁ + B₁ M) = desired` for a controllable pair.
fn place_block(a11: &Matrix, b1: &Matrix, desired: &[C64], seed: u64, tol: &TolerancePolicy) -> Result<Matrix> {
    let (k, m) = b1.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (1.0 + spectral_norm(a11)) / spectral_norm(b1).max(f64::MIN_POSITIVE);
    for attempt in 0..PLACEMENT_ATTEMPTS {
        let g = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        // a random preliminary feedback makes the loop cyclic
        let m0 = if attempt == 0 {
            Matrix::zeros(m, k)
        } else {
            Matrix::from_fn(m, k, |_, _| rng.random_range(-1.0..1.0)) * scale
        };
        let a_pre = a11 + b1 * &m0;
        let b = b1 * &g;
        let Some(kvec) = ackermann(&a_pre, &b, desired, tol) else {
            continue;
        };
        let gain = m0 + &g * kvec.transpose();
        let achieved = eigenvalues_sorted(&(a11 + b1 * &gain));
        if char_poly_distance(&achieved, desired, spectral_norm(a11)) <= PLACEMENT_TOLERANCE {
            return Ok(gain);
        }
    }
    Err(Error::PlacementFailed(format!(
        "no accurate placement after {PLACEMENT_ATTEMPTS} attempts"
    )))
}

/// Simulated cost of `u = −K_X x + G_X L x` against `x₀ᵀ X̄ x₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostInvariance {
    pub simulated: f64,
    pub optimal: f64,
    pub residual: f64,
    pub horizon: usize,
}

/// With `horizon = None` the simulation runs until
/// `‖x_t‖ ≤ 1e-8 · (1 + ‖x₀‖)`.
pub fn cost_invariance_residual(
    triple: &PopovTriple,
    x_bar: &Matrix,
    l: &Matrix,
    x0: &DVector<f64>,
    horizon: Option<usize>,
    tol: &TolerancePolicy,
) -> Result<CostInvariance> {
    let xq = x_quantities(triple, x_bar, tol)?;
    let (n, m) = (triple.n(), triple.m());
    if l.shape() != (m, n) || x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "L {}x{} / x0 length {} for n={n}, m={m}",
            l.nrows(),
            l.ncols(),
            x0.len()
        )));
    }
    if horizon == Some(0) {
        return Err(Error::PreconditionViolated("horizon must be at least 1".into()));
    }
    let optimal = optimal_cost(x_bar, x0)?;
    let f = &xq.k_x - &xq.g_x * l;
    let a_cl = triple.a() - triple.b() * &f;
    let (q, r, s) = (triple.q(), triple.r(), triple.s());
    let tail = 1e-8 * (1.0 + x0.norm());
    let limit = horizon.unwrap_or(MAX_AUTO_HORIZON);
    let mut state = x0.clone();
    let mut simulated = 0.0;
    let mut steps = 0;
    while steps < limit {
        if horizon.is_none() && state.norm() <= tail {
            break;
        }
        let u = -(&f * &state);
        simulated += state.dot(&(q * &state)) + 2.0 * state.dot(&(s * &u)) + u.dot(&(r * &u));
        state = &a_cl * state;
        steps += 1;
        let norm = state.norm();
        if !norm.is_finite() || norm > TRAJECTORY_CAP {
            return Err(Error::DivergentTrajectory { step: steps, norm });
        }
    }
    if horizon.is_none() && state.norm() > tail {
        return Err(Error::DivergentTrajectory {
            step: steps,
            norm: state.norm(),
        });
    }
    Ok(CostInvariance {
        simulated,
        optimal,
        residual: (simulated - optimal).abs(),
        horizon: steps,
    })
}
