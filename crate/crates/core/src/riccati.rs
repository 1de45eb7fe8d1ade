//! Riccati difference iteration from zero, the minimal positive semidefinite
//! solution, and finite-horizon cost simulation.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{largest_output_nulling, Quadruple};
use crate::numerics::{all_finite, min_eigenvalue, symmetrize, Matrix, TolerancePolicy};
use crate::popov::{classify_from, x_quantities, x_quantities_with_rank, PopovTriple, SolutionClass};

/// Consecutive small increments required before declaring convergence.
pub const CONVERGENCE_WINDOW: usize = 3;

/// Relative size at which the iteration is declared divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

/// Slack allowed on `λ_min(X_{t+1} − X_t)` relative to `1 + ‖X_{t+1}‖_F`.
pub const MONOTONE_SLACK: f64 = 1e-9;

/// State norm beyond which a simulated trajectory is abandoned.
pub const TRAJECTORY_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Diverged,
    MaxIterReached,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::Diverged => "Diverged",
            SolveStatus::MaxIterReached => "MaxIterReached",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveOptions {
    /// Once `dim ker R_{X_t}` has been constant for this many steps, keep the
    /// pseudo-inverse rank fixed for the rest of the iteration.
    pub freeze_rank_after: Option<usize>,
    /// Iterate `𝐑` verbatim instead of compressing each iterate onto the
    /// orthogonal complement of the largest output-nulling subspace.
    pub plain_recursion: bool,
}

/// One step `X_t → X_{t+1}` of the iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// `‖X_{t+1} − X_t‖_F`
    pub increment_norm: f64,
    /// `λ_min(X_{t+1} − X_t)`
    pub increment_min_eigenvalue: f64,
    /// `‖X_{t+1}‖_F`
    pub iterate_norm: f64,
    /// `dim ker R_{X_t}`
    pub kernel_dim: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Last iterate; the minimal solution when `status` is `Converged`.
    pub x_bar: Matrix,
    pub status: SolveStatus,
    pub iterations: usize,
    /// First index after which `dim ker R_{X_t}` no longer changes.
    pub kernel_stationary_at: usize,
    pub trace: Vec<TraceEntry>,
    /// Every increment was positive semidefinite up to [`MONOTONE_SLACK`].
    pub monotone: bool,
    /// `dim ker R_{X_t}` never increased.
    pub kernel_chain_monotone: bool,
    pub classification: Option<SolutionClass>,
}

/// `𝐑[P]`
pub fn riccati_step(triple: &PopovTriple, p: &Matrix, tol: &TolerancePolicy) -> Result<Matrix> {
    Ok(x_quantities(triple, p, tol)?.riccati_value())
}

pub fn solve_min_psd(triple: &PopovTriple, tol: &TolerancePolicy) -> Result<SolveReport> {
    solve_min_psd_with(triple, tol, SolveOptions::default())
}

pub fn solve_min_psd_with(triple: &PopovTriple, tol: &TolerancePolicy, options: SolveOptions) -> Result<SolveReport> {
    tol.validate()?;
    let n = triple.n();
    let cap = DIVERGENCE_FACTOR * (1.0 + triple.popov_matrix().norm());
    let mut x = Matrix::zeros(n, n);
    let mut trace = Vec::new();
    let mut small_run = 0usize;
    let mut frozen_rank: Option<usize> = None;
    let mut constant_kernel_run = 0usize;
    let mut status = SolveStatus::MaxIterReached;
    let compress = if options.plain_recursion {
        None
    } else {
        let v_star = largest_output_nulling(&Quadruple::from_triple(triple), tol)?;
        (!v_star.is_zero()).then(|| v_star.complement().projector())
    };

    for _ in 0..tol.max_iter {
        let xq = x_quantities_with_rank(triple, &x, tol, frozen_rank)?;
        let kernel_dim = xq.ker_r_x.ncols();
        let mut next = xq.riccati_value();
        if !all_finite(&next) {
            status = SolveStatus::Diverged;
            break;
        }
        if let Some(p) = &compress {
            next = symmetrize(&(p * &next * p));
        }
        let increment = &next - &x;
        let increment_norm = increment.norm();
        trace.push(TraceEntry {
            increment_norm,
            increment_min_eigenvalue: min_eigenvalue(&increment),
            iterate_norm: next.norm(),
            kernel_dim,
        });

        if let Some(window) = options.freeze_rank_after {
            let unchanged = trace.len() >= 2 && trace[trace.len() - 2].kernel_dim == kernel_dim;
            constant_kernel_run = if unchanged { constant_kernel_run + 1 } else { 0 };
            if frozen_rank.is_none() && constant_kernel_run >= window {
                frozen_rank = Some(xq.r_x_rank);
            }
        }

        let scale = x.norm();
        x = next;
        if x.norm() > cap {
            status = SolveStatus::Diverged;
            break;
        }
        if tol.negligible(increment_norm, scale) {
            small_run += 1;
            if small_run >= CONVERGENCE_WINDOW {
                status = SolveStatus::Converged;
                break;
            }
        } else {
            small_run = 0;
        }
    }

    let monotone = trace
        .iter()
        .all(|e| e.increment_min_eigenvalue >= -MONOTONE_SLACK * (1.0 + e.iterate_norm));
    let kernel_chain_monotone = trace.windows(2).all(|w| w[1].kernel_dim <= w[0].kernel_dim);
    let kernel_stationary_at = trace
        .windows(2)
        .rposition(|w| w[1].kernel_dim != w[0].kernel_dim)
        .map_or(0, |i| i + 1);
    let classification = match status {
        SolveStatus::Converged => {
            let xq = x_quantities(triple, &x, tol)?;
            Some(classify_from(triple, &xq, tol))
        }
        _ => None,
    };
    Ok(SolveReport {
        x_bar: x,
        status,
        iterations: trace.len(),
        kernel_stationary_at,
        trace,
        monotone,
        kernel_chain_monotone,
        classification,
    })
}

/// `x₀ᵀ X̄ x₀`
pub fn optimal_cost(x_bar: &Matrix, x0: &DVector<f64>) -> Result<f64> {
    if x_bar.nrows() != x0.len() || x_bar.ncols() != x0.len() {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {}, X is {}x{}",
            x0.len(),
            x_bar.nrows(),
            x_bar.ncols()
        )));
    }
    Ok((x0.transpose() * x_bar * x0)[(0, 0)])
}

/// `(K_X, G_X)`: every optimal control is `u = −K_X x + G_X v`.
pub fn optimal_control_set(triple: &PopovTriple, x_bar: &Matrix, tol: &TolerancePolicy) -> Result<(Matrix, Matrix)> {
    let xq = x_quantities(triple, x_bar, tol)?;
    Ok((xq.k_x, xq.g_x))
}

/// Truncated cost `Σ_{t<T} [x;u]ᵀ Π [x;u]` of `u_t = −K_X x_t + G_X L x_t`.
pub fn simulate_cost(
    triple: &PopovTriple,
    x: &Matrix,
    l: &Matrix,
    x0: &DVector<f64>,
    horizon: usize,
    tol: &TolerancePolicy,
) -> Result<f64> {
    let xq = x_quantities(triple, x, tol)?;
    if l.shape() != (triple.m(), triple.n()) {
        return Err(Error::DimensionMismatch(format!(
            "L must be {}x{}, got {}x{}",
            triple.m(),
            triple.n(),
            l.nrows(),
            l.ncols()
        )));
    }
    let f = &xq.k_x - &xq.g_x * l;
    simulate_feedback_cost(triple, &f, x0, horizon)
}

/// Truncated cost of the static feedback `u_t = −F x_t`.
pub fn simulate_feedback_cost(triple: &PopovTriple, f: &Matrix, x0: &DVector<f64>, horizon: usize) -> Result<f64> {
    let states = simulate_trajectory(triple, f, x0, horizon)?;
    let (q, r, s) = (triple.q(), triple.r(), triple.s());
    let mut cost = 0.0;
    for x in &states[..horizon] {
        let u = -(f * x);
        cost += x.dot(&(q * x)) + 2.0 * x.dot(&(s * &u)) + u.dot(&(r * &u));
    }
    Ok(cost)
}

/// States `x_0, …, x_T` of `x_{t+1} = (A − B F) x_t`.
pub fn simulate_trajectory(
    triple: &PopovTriple,
    f: &Matrix,
    x0: &DVector<f64>,
    horizon: usize,
) -> Result<Vec<DVector<f64>>> {
    let (n, m) = (triple.n(), triple.m());
    if horizon == 0 {
        return Err(Error::PreconditionViolated("horizon must be at least 1".into()));
    }
    if f.shape() != (m, n) || x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "feedback {}x{} / x0 length {} for n={n}, m={m}",
            f.nrows(),
            f.ncols(),
            x0.len()
        )));
    }
    let a_cl = triple.a() - triple.b() * f;
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(x0.clone());
    for step in 1..=horizon {
        let next = &a_cl * &states[step - 1];
        let norm = next.norm();
        if !norm.is_finite() || norm > TRAJECTORY_CAP {
            return Err(Error::DivergentTrajectory { step, norm });
        }
        states.push(next);
    }
    Ok(states)
}

/// `Y − X̄ ⪰ 0` up to `slack · (1 + ‖Y‖_F)`.
pub fn dominates(y: &Matrix, x_bar: &Matrix, slack: f64) -> bool {
    min_eigenvalue(&symmetrize(&(y - x_bar))) >= -slack * (1.0 + y.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    fn v(data: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(data)
    }

    #[test]
    fn step_examples() {
        let t = fixtures::free_subspace_triple().unwrap();
        let x_bar = fixtures::free_subspace_solution();
        assert_relative_eq!(
            riccati_step(&t, &Matrix::zeros(2, 2), &tol()).unwrap(),
            x_bar,
            epsilon = 1e-15
        );
        assert_relative_eq!(riccati_step(&t, &x_bar, &tol()).unwrap(), x_bar, epsilon = 1e-14);
        let s = fixtures::scalar_triple().unwrap();
        assert_relative_eq!(riccati_step(&s, &Matrix::zeros(1, 1), &tol()).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn free_subspace_solve() {
        let t = fixtures::free_subspace_triple().unwrap();
        let rep = solve_min_psd(&t, &tol()).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert!(rep.iterations <= 5, "{}", rep.iterations);
        assert_relative_eq!(rep.x_bar, fixtures::free_subspace_solution(), epsilon = 1e-12);
        assert_eq!(rep.classification, Some(SolutionClass::Cgdare));
        assert!(rep.monotone && rep.kernel_chain_monotone);
    }

    #[test]
    fn scalar_solve() {
        let s = fixtures::scalar_triple().unwrap();
        let rep = solve_min_psd(&s, &tol()).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_relative_eq!(rep.x_bar[(0, 0)], fixtures::scalar_solution(), epsilon = 1e-9);
        assert_eq!(rep.classification, Some(SolutionClass::Dare));
    }

    #[test]
    fn zero_dynamics_gives_zero() {
        let t = PopovTriple::new(
            Matrix::zeros(2, 2),
            Matrix::from_row_slice(2, 1, &[1.0, 2.0]),
            Matrix::zeros(2, 2),
            Matrix::identity(1, 1),
            Matrix::zeros(2, 1),
            &tol(),
        )
        .unwrap();
        let rep = solve_min_psd(&t, &tol()).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_eq!(rep.x_bar, Matrix::zeros(2, 2));
    }

    #[test]
    fn unbounded_cost_diverges() {
        // unstable, uncontrollable, costly mode
        let t = PopovTriple::new(
            Matrix::from_row_slice(1, 1, &[2.0]),
            Matrix::zeros(1, 1),
            Matrix::identity(1, 1),
            Matrix::identity(1, 1),
            Matrix::zeros(1, 1),
            &tol(),
        )
        .unwrap();
        let rep = solve_min_psd(&t, &tol()).unwrap();
        assert_eq!(rep.status, SolveStatus::Diverged);
        assert!(rep.classification.is_none());
    }

    #[test]
    fn marginal_mode_hits_iteration_cap() {
        // X_t = t grows without bound but slower than the divergence cap
        let t = PopovTriple::new(
            Matrix::from_row_slice(1, 1, &[1.0]),
            Matrix::zeros(1, 1),
            Matrix::identity(1, 1),
            Matrix::identity(1, 1),
            Matrix::zeros(1, 1),
            &tol(),
        )
        .unwrap();
        let small = TolerancePolicy { max_iter: 50, ..tol() };
        let rep = solve_min_psd(&t, &small).unwrap();
        assert_eq!(rep.status, SolveStatus::MaxIterReached);
        assert_eq!(rep.iterations, 50);
    }

    #[test]
    fn rank_freeze_gives_same_answer() {
        let t = fixtures::free_subspace_triple().unwrap();
        let opts = SolveOptions {
            freeze_rank_after: Some(1),
            ..SolveOptions::default()
        };
        let rep = solve_min_psd_with(&t, &tol(), opts).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_relative_eq!(rep.x_bar, fixtures::free_subspace_solution(), epsilon = 1e-12);
    }

    #[test]
    fn costs() {
        let t = fixtures::free_subspace_triple().unwrap();
        let x_bar = fixtures::free_subspace_solution();
        assert_relative_eq!(optimal_cost(&x_bar, &v(&[3.0, 2.0])).unwrap(), 4.0);
        assert_eq!(optimal_cost(&x_bar, &v(&[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(optimal_cost(&x_bar, &v(&[1.0, 0.0])).unwrap(), 0.0);

        let zero = Matrix::zeros(2, 2);
        let l = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]);
        let x0 = v(&[3.0, 2.0]);
        assert_relative_eq!(
            simulate_cost(&t, &x_bar, &zero, &x0, 50, &tol()).unwrap(),
            4.0,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            simulate_cost(&t, &x_bar, &l, &x0, 50, &tol()).unwrap(),
            4.0,
            epsilon = 1e-10
        );
        assert_eq!(simulate_cost(&t, &x_bar, &l, &v(&[0.0, 0.0]), 50, &tol()).unwrap(), 0.0);
    }

    #[test]
    fn control_set() {
        let t = fixtures::free_subspace_triple().unwrap();
        let (k, g) = optimal_control_set(&t, &fixtures::free_subspace_solution(), &tol()).unwrap();
        assert_relative_eq!(k, Matrix::from_row_slice(2, 2, &[0.0, 0.5, 0.0, 0.5]), epsilon = 1e-14);
        assert_relative_eq!(
            g,
            Matrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]),
            epsilon = 1e-14
        );

        let s = fixtures::scalar_triple().unwrap();
        let (_, g) = optimal_control_set(&s, &Matrix::from_row_slice(1, 1, &[1.0]), &tol()).unwrap();
        assert_eq!(g, Matrix::zeros(1, 1));
    }

    #[test]
    fn divergent_simulation_is_reported() {
        let t = fixtures::free_subspace_triple().unwrap();
        let f = Matrix::from_row_slice(2, 2, &[-5.0, 0.0, 0.0, 0.0]);
        let err = simulate_feedback_cost(&t, &f, &v(&[1.0, 1.0]), 1000).unwrap_err();
        assert!(matches!(err, Error::DivergentTrajectory { .. }));
    }
}
