//! Evaluation of the Popov function `Φ(z) = W~(z) W(z)` and of the spectral
//! factor built from a Riccati solution.
//!
//! For real data `W~(z) = W(1/z)ᵀ`, so
//! `Φ(z) = [((z⁻¹I − A)⁻¹B)ᵀ  I] Π [(zI − A)⁻¹B; I]`.

use std::f64::consts::TAU;

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{complex_singular_values, psd_sqrt, spectral_norm, Matrix, TolerancePolicy};
use crate::popov::{classify_from, x_quantities, PopovTriple, SolutionClass, XQuantities};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Relative distance kept between evaluation points and poles.
pub const POLE_MARGIN: f64 = 1e-3;

/// Smallest sample count accepted by [`normal_rank_phi`].
pub const MIN_SAMPLES: usize = 8;

/// Evaluation point together with the sampled value.
#[derive(Debug, Clone)]
pub struct RationalSample {
    pub z: C64,
    pub value: CMatrix,
}

pub fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|v| Complex::new(v, 0.0))
}

fn complex_norm(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn complex_spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    complex_singular_values(m).first().copied().unwrap_or(0.0)
}

/// Eigenvalues of a square matrix and the pole margin they induce.
#[derive(Debug, Clone)]
pub struct PoleSet {
    poles: Vec<C64>,
    margin: f64,
}

impl PoleSet {
    pub fn of(a: &Matrix) -> Self {
        let poles: Vec<C64> = if a.nrows() == 0 {
            Vec::new()
        } else {
            a.complex_eigenvalues().iter().copied().collect()
        };
        let radius = poles.iter().fold(0.0f64, |acc, p| acc.max(p.norm()));
        Self {
            poles,
            margin: POLE_MARGIN * radius.max(1.0),
        }
    }

    fn distance(&self, z: C64) -> f64 {
        self.poles.iter().map(|p| (z - p).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Error unless `z` is at least the margin away from every pole.
    pub fn check(&self, z: C64) -> Result<()> {
        let distance = self.distance(z);
        if !z.re.is_finite() || !z.im.is_finite() || distance <= self.margin {
            return Err(Error::PoleTooClose {
                re: z.re,
                im: z.im,
                distance,
            });
        }
        Ok(())
    }

    /// Both `z` and `1/z` avoid the poles, and `z` avoids the origin.
    pub fn check_both(&self, z: C64) -> Result<()> {
        if z.norm() <= self.margin {
            return Err(Error::PoleTooClose {
                re: z.re,
                im: z.im,
                distance: z.norm(),
            });
        }
        self.check(z)?;
        self.check(z.inv())
    }
}

/// `(zI − A)⁻¹ B`, assuming the pole check has been done.
fn resolvent(a: &Matrix, z: C64, b: &Matrix) -> Result<CMatrix> {
    let n = a.nrows();
    let shifted = CMatrix::from_diagonal_element(n, n, z) - to_complex(a);
    shifted
        .lu()
        .solve(&to_complex(b))
        .ok_or_else(|| Error::NumericalInconsistency(format!("zI − A singular at z = {z}")))
}

fn stacked_with_identity(top: CMatrix, m: usize) -> CMatrix {
    let n = top.nrows();
    let mut out = CMatrix::zeros(n + m, m);
    out.view_mut((0, 0), (n, m)).copy_from(&top);
    out.view_mut((n, 0), (m, m)).fill_with_identity();
    out
}

/// `[Y(1/z)ᵀ I] M [Y(z); I]` with `Y(z) = (zI − A)⁻¹B`.
fn sandwich(triple: &PopovTriple, middle: &Matrix, z: C64) -> Result<CMatrix> {
    PoleSet::of(triple.a()).check_both(z)?;
    let m = triple.m();
    let right = stacked_with_identity(resolvent(triple.a(), z, triple.b())?, m);
    let left = stacked_with_identity(resolvent(triple.a(), z.inv(), triple.b())?, m).transpose();
    Ok(left * to_complex(middle) * right)
}

pub fn eval_phi(triple: &PopovTriple, z: C64, _tol: &TolerancePolicy) -> Result<CMatrix> {
    sandwich(triple, &triple.popov_matrix(), z)
}

/// `W(z) = C(zI − A)⁻¹B + D` for the stored factor.
pub fn eval_w(triple: &PopovTriple, z: C64) -> Result<CMatrix> {
    PoleSet::of(triple.a()).check(z)?;
    Ok(to_complex(triple.c()) * resolvent(triple.a(), z, triple.b())? + to_complex(triple.d()))
}

/// `‖Φ(z) − [Y(1/z)ᵀ I] Π_X [Y(z); I]‖_F`.
pub fn phi_pix_identity_residual(triple: &PopovTriple, x: &Matrix, z: C64, tol: &TolerancePolicy) -> Result<f64> {
    let xq = x_quantities(triple, x, tol)?;
    let phi = eval_phi(triple, z, tol)?;
    let shifted = sandwich(triple, &xq.pi_x, z)?;
    Ok(complex_norm(&(phi - shifted)))
}

/// Rank of `Φ` at one point, relative to the size of the factors it is built from.
fn sample_rank(triple: &PopovTriple, pi_norm: f64, z: C64, tol: &TolerancePolicy) -> Result<usize> {
    let m = triple.m();
    let right = stacked_with_identity(resolvent(triple.a(), z, triple.b())?, m);
    let left = stacked_with_identity(resolvent(triple.a(), z.inv(), triple.b())?, m).transpose();
    let phi = &left * to_complex(&triple.popov_matrix()) * &right;
    let scale = pi_norm * complex_spectral_norm(&left) * complex_spectral_norm(&right);
    if scale == 0.0 || m == 0 {
        return Ok(0);
    }
    let cutoff = tol.rank_rel * m as f64 * scale;
    Ok(complex_singular_values(&phi).iter().filter(|&&s| s > cutoff).count())
}

/// Seeded evaluation points with `|z| ∈ [0.7, 1.4]` avoiding the poles.
pub fn sample_points(a: &Matrix, count: usize, seed: u64) -> Result<Vec<C64>> {
    let poles = PoleSet::of(a);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while points.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(Error::NumericalInconsistency(
                "could not find evaluation points away from the poles".into(),
            ));
        }
        let z = Complex::from_polar(rng.random_range(0.7..1.4), rng.random_range(0.0..TAU));
        if poles.check_both(z).is_ok() {
            points.push(z);
        }
    }
    Ok(points)
}

/// Normal rank of `Φ`: the largest rank observed over seeded samples.
pub fn normal_rank_phi(triple: &PopovTriple, tol: &TolerancePolicy, samples: usize, seed: u64) -> Result<usize> {
    if samples < MIN_SAMPLES {
        return Err(Error::PreconditionViolated(format!(
            "normal rank needs at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let pi_norm = spectral_norm(&triple.popov_matrix());
    let mut best = 0;
    for z in sample_points(triple.a(), samples, seed)? {
        best = best.max(sample_rank(triple, pi_norm, z, tol)?);
    }
    Ok(best)
}

/// Values of `Φ` at the seeded sample points.
pub fn sample_phi(
    triple: &PopovTriple,
    tol: &TolerancePolicy,
    samples: usize,
    seed: u64,
) -> Result<Vec<RationalSample>> {
    sample_points(triple.a(), samples, seed)?
        .into_iter()
        .map(|z| {
            Ok(RationalSample {
                z,
                value: eval_phi(triple, z, tol)?,
            })
        })
        .collect()
}

/// `W₁(z) = R_X^{1/2} (K_X (zI − A)⁻¹B + I)`.
pub fn spectral_factor_eval(triple: &PopovTriple, x: &Matrix, z: C64, tol: &TolerancePolicy) -> Result<CMatrix> {
    let xq = x_quantities(triple, x, tol)?;
    factor_from(triple, &xq, z, tol)
}

fn factor_from(triple: &PopovTriple, xq: &XQuantities, z: C64, tol: &TolerancePolicy) -> Result<CMatrix> {
    PoleSet::of(triple.a()).check(z)?;
    let root = psd_sqrt(&xq.r_x, "R_X", tol)?;
    let m = triple.m();
    let t = to_complex(&xq.k_x) * resolvent(triple.a(), z, triple.b())? + CMatrix::identity(m, m);
    Ok(to_complex(&root) * t)
}

/// `‖Φ(z) − W₁(1/z)ᵀ W₁(z)‖_F`.
pub fn spectral_factor_residual(triple: &PopovTriple, x: &Matrix, z: C64, tol: &TolerancePolicy) -> Result<f64> {
    let xq = x_quantities(triple, x, tol)?;
    let phi = eval_phi(triple, z, tol)?;
    let w = factor_from(triple, &xq, z, tol)?;
    let w_tilde = factor_from(triple, &xq, z.inv(), tol)?.transpose();
    Ok(complex_norm(&(phi - w_tilde * w)))
}

/// `T_X(z) = I + K_X (zI − A)⁻¹ B`.
pub fn t_eval(triple: &PopovTriple, xq: &XQuantities, z: C64) -> Result<CMatrix> {
    PoleSet::of(triple.a()).check(z)?;
    let m = triple.m();
    Ok(CMatrix::identity(m, m) + to_complex(&xq.k_x) * resolvent(triple.a(), z, triple.b())?)
}

/// `T_X⁻¹(z) = I − K_X (zI − A_X)⁻¹ B`.
pub fn t_inverse_eval(triple: &PopovTriple, xq: &XQuantities, z: C64) -> Result<CMatrix> {
    PoleSet::of(&xq.a_x).check(z)?;
    let m = triple.m();
    Ok(CMatrix::identity(m, m) - to_complex(&xq.k_x) * resolvent(&xq.a_x, z, triple.b())?)
}

/// `‖T_X(z) T_X⁻¹(z) − I‖_F`.
pub fn t_inverse_identity_residual(triple: &PopovTriple, x: &Matrix, z: C64, tol: &TolerancePolicy) -> Result<f64> {
    let xq = x_quantities(triple, x, tol)?;
    let m = triple.m();
    let product = t_eval(triple, &xq, z)? * t_inverse_eval(triple, &xq, z)?;
    Ok(complex_norm(&(product - CMatrix::identity(m, m))))
}

/// `‖T_X⁻¹(1/z)ᵀ Φ(z) T_X⁻¹(z) − R_X‖_F`.
pub fn factorized_identity_residual(triple: &PopovTriple, x: &Matrix, z: C64, tol: &TolerancePolicy) -> Result<f64> {
    let xq = x_quantities(triple, x, tol)?;
    PoleSet::of(&xq.a_x).check_both(z)?;
    let phi = eval_phi(triple, z, tol)?;
    let right = t_inverse_eval(triple, &xq, z)?;
    let left = t_inverse_eval(triple, &xq, z.inv())?.transpose();
    Ok(complex_norm(&(left * phi * right - to_complex(&xq.r_x))))
}

/// `rank R_X` against the normal rank of `Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankComparison {
    pub rank_r_x: usize,
    pub normal_rank: usize,
    pub classification: SolutionClass,
    /// Equality for DARE/CGDARE solutions, `≤` for DRLMI-only ones.
    pub consistent: bool,
}

pub fn rank_rx_vs_normal_rank(
    triple: &PopovTriple,
    x: &Matrix,
    tol: &TolerancePolicy,
    samples: usize,
    seed: u64,
) -> Result<RankComparison> {
    let xq = x_quantities(triple, x, tol)?;
    let classification = classify_from(triple, &xq, tol);
    let normal_rank = normal_rank_phi(triple, tol, samples, seed)?;
    let rank_r_x = xq.r_x_rank;
    let consistent = match classification {
        SolutionClass::Dare | SolutionClass::Cgdare => rank_r_x == normal_rank,
        SolutionClass::DrlmiOnly => rank_r_x <= normal_rank,
        other => {
            return Err(Error::PreconditionViolated(format!(
                "rank comparison needs a CGDARE or DRLMI solution, candidate is {other}"
            )))
        }
    };
    Ok(RankComparison {
        rank_r_x,
        normal_rank,
        classification,
        consistent,
    })
}
