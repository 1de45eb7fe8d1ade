//! Popov triples and the quantities derived from a candidate solution `X`.

use std::fmt;

use crate::error::{Error, Result};
use crate::numerics::{
    block2x2, ensure_finite, ensure_symmetric, hstack, is_psd, psd_factor, spectral_norm, symmetrize, vstack, Matrix,
    SymmetricPinv, TolerancePolicy,
};

/// Validated LQ data `Σ = (A, B; Q, R, S)` with `Π = [[Q, S], [Sᵀ, R]] ⪰ 0`.
///
/// A factor `Π = [C D]ᵀ[C D]` is kept alongside; it is either supplied by the
/// caller (and checked) or the minimal-row factor from the eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct PopovTriple {
    a: Matrix,
    b: Matrix,
    q: Matrix,
    r: Matrix,
    s: Matrix,
    c: Matrix,
    d: Matrix,
}

fn expect_shape(m: &Matrix, name: &str, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::DimensionMismatch(format!(
            "{name} must be {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

impl PopovTriple {
    pub fn new(a: Matrix, b: Matrix, q: Matrix, r: Matrix, s: Matrix, tol: &TolerancePolicy) -> Result<Self> {
        let (q, r) = Self::check_data(&a, &b, &q, &r, &s, tol)?;
        let pi = block2x2(&q, &s, &s.transpose(), &r);
        let factor = psd_factor(&pi, tol).map_err(|e| rename_psd(e, "Popov matrix"))?;
        let n = a.nrows();
        let c = factor.columns(0, n).into_owned();
        let d = factor.columns(n, b.ncols()).into_owned();
        Ok(Self { a, b, q, r, s, c, d })
    }

    /// Like [`PopovTriple::new`] but with a caller-supplied factor, which must
    /// reproduce `Q = CᵀC`, `S = CᵀD`, `R = DᵀD`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_factor(
        a: Matrix,
        b: Matrix,
        q: Matrix,
        r: Matrix,
        s: Matrix,
        c: Matrix,
        d: Matrix,
        tol: &TolerancePolicy,
    ) -> Result<Self> {
        let (q, r) = Self::check_data(&a, &b, &q, &r, &s, tol)?;
        let (n, m) = b.shape();
        if c.ncols() != n || d.ncols() != m || c.nrows() != d.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "factor C ({}x{}) and D ({}x{}) incompatible with n={n}, m={m}",
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        ensure_finite(&c, "C")?;
        ensure_finite(&d, "D")?;
        let pi = block2x2(&q, &s, &s.transpose(), &r);
        if !is_psd(&pi, tol) {
            let lo = crate::numerics::min_eigenvalue(&pi);
            return Err(Error::NotPositiveSemidefinite {
                what: "Popov matrix".into(),
                min_eigenvalue: lo,
            });
        }
        let cd = hstack(&c, &d);
        let mismatch = (&pi - cd.transpose() * &cd).norm();
        if mismatch > tol.psd_clip.sqrt() * (1.0 + pi.norm()) {
            return Err(Error::PreconditionViolated(format!(
                "supplied C, D do not factor the Popov matrix (mismatch {mismatch:.3e})"
            )));
        }
        Ok(Self { a, b, q, r, s, c, d })
    }

    /// Triple generated by an output map: `Q = CᵀC`, `S = CᵀD`, `R = DᵀD`.
    pub fn from_output_map(a: Matrix, b: Matrix, c: Matrix, d: Matrix, tol: &TolerancePolicy) -> Result<Self> {
        let q = symmetrize(&(c.transpose() * &c));
        let s = c.transpose() * &d;
        let r = symmetrize(&(d.transpose() * &d));
        Self::with_factor(a, b, q, r, s, c, d, tol)
    }

    fn check_data(
        a: &Matrix,
        b: &Matrix,
        q: &Matrix,
        r: &Matrix,
        s: &Matrix,
        tol: &TolerancePolicy,
    ) -> Result<(Matrix, Matrix)> {
        let n = a.nrows();
        expect_shape(a, "A", n, n)?;
        let m = b.ncols();
        expect_shape(b, "B", n, m)?;
        expect_shape(q, "Q", n, n)?;
        expect_shape(r, "R", m, m)?;
        expect_shape(s, "S", n, m)?;
        for (mat, name) in [(a, "A"), (b, "B"), (q, "Q"), (r, "R"), (s, "S")] {
            ensure_finite(mat, name)?;
        }
        ensure_symmetric(q, "Q", tol)?;
        ensure_symmetric(r, "R", tol)?;
        Ok((symmetrize(q), symmetrize(r)))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn s(&self) -> &Matrix {
        &self.s
    }

    /// Output matrix `C` of the factor `Π = [C D]ᵀ[C D]`.
    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// Feedthrough `D` of the factor `Π = [C D]ᵀ[C D]`.
    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn popov_matrix(&self) -> Matrix {
        block2x2(&self.q, &self.s, &self.s.transpose(), &self.r)
    }
}

fn rename_psd(e: Error, what: &str) -> Error {
    match e {
        Error::NotPositiveSemidefinite { min_eigenvalue, .. } => Error::NotPositiveSemidefinite {
            what: what.into(),
            min_eigenvalue,
        },
        Error::NotSymmetric { asymmetry, .. } => Error::NotSymmetric {
            what: what.into(),
            asymmetry,
        },
        other => other,
    }
}

/// Validate raw data into a [`PopovTriple`].
pub fn validate_triple(
    a: Matrix,
    b: Matrix,
    q: Matrix,
    r: Matrix,
    s: Matrix,
    tol: &TolerancePolicy,
) -> Result<PopovTriple> {
    PopovTriple::new(a, b, q, r, s, tol)
}

/// Everything derived from a symmetric candidate `X`.
#[derive(Debug, Clone)]
pub struct XQuantities {
    pub x: Matrix,
    /// `Q + AᵀXA − X`
    pub q_x: Matrix,
    /// `AᵀXB + S`
    pub s_x: Matrix,
    /// `R + BᵀXB`
    pub r_x: Matrix,
    pub r_x_pinv: Matrix,
    pub r_x_rank: usize,
    /// Orthonormal basis of `ker R_X`.
    pub ker_r_x: Matrix,
    /// Orthogonal projector onto `ker R_X`.
    pub g_x: Matrix,
    /// `R_X† S_Xᵀ`
    pub k_x: Matrix,
    /// `A − B K_X`
    pub a_x: Matrix,
    pub pi_x: Matrix,
    /// `[I; −K_X]ᵀ Π [I; −K_X]`
    pub q0_x: Matrix,
    /// `C − D K_X`
    pub c_x: Matrix,
}

impl XQuantities {
    /// `𝐑[X] = AᵀXA − S_X R_X† S_Xᵀ + Q`.
    pub fn riccati_value(&self) -> Matrix {
        symmetrize(&(&self.q_x + &self.x - &self.s_x * &self.k_x))
    }

    /// `𝐑[X] − X`.
    pub fn residual(&self) -> Matrix {
        symmetrize(&(&self.q_x - &self.s_x * &self.k_x))
    }

    pub fn is_r_x_singular(&self) -> bool {
        self.ker_r_x.ncols() > 0
    }
}

fn check_candidate(triple: &PopovTriple, x: &Matrix, tol: &TolerancePolicy) -> Result<()> {
    expect_shape(x, "X", triple.n(), triple.n())?;
    ensure_finite(x, "X")?;
    ensure_symmetric(x, "X", tol)
}

pub fn x_quantities(triple: &PopovTriple, x: &Matrix, tol: &TolerancePolicy) -> Result<XQuantities> {
    x_quantities_with_rank(triple, x, tol, None)
}

/// As [`x_quantities`], optionally forcing the rank used for `R_X†`.
pub fn x_quantities_with_rank(
    triple: &PopovTriple,
    x: &Matrix,
    tol: &TolerancePolicy,
    forced_rank: Option<usize>,
) -> Result<XQuantities> {
    check_candidate(triple, x, tol)?;
    let n = triple.n();
    let x = symmetrize(x);
    let (a, b) = (triple.a(), triple.b());
    let at_x = a.transpose() * &x;
    let q_x = symmetrize(&(triple.q() + &at_x * a - &x));
    let s_x = &at_x * b + triple.s();
    let r_x = symmetrize(&(triple.r() + b.transpose() * &x * b));
    let summands = spectral_norm(triple.r()) + spectral_norm(b).powi(2) * spectral_norm(&x);
    let split = SymmetricPinv::with_rank_scaled(&r_x, tol, forced_rank, summands);
    let g_x = split.kernel_projector();
    let k_x = &split.pinv * s_x.transpose();
    let a_x = a - b * &k_x;
    let pi_x = block2x2(&q_x, &s_x, &s_x.transpose(), &r_x);
    let closing = vstack(&Matrix::identity(n, n), &(-&k_x));
    let q0_x = symmetrize(&(closing.transpose() * triple.popov_matrix() * &closing));
    let c_x = triple.c() - triple.d() * &k_x;
    Ok(XQuantities {
        x,
        q_x,
        s_x,
        r_x,
        r_x_pinv: split.pinv,
        r_x_rank: split.rank,
        ker_r_x: split.kernel,
        g_x,
        k_x,
        a_x,
        pi_x,
        q0_x,
        c_x,
    })
}

/// `𝐑[X] − X`, symmetric.
pub fn gdare_residual(triple: &PopovTriple, x: &Matrix, tol: &TolerancePolicy) -> Result<Matrix> {
    Ok(x_quantities(triple, x, tol)?.residual())
}

/// `‖𝐑[X] − X‖_F ≤ conv_rel · (1 + ‖X‖_F)`.
pub fn residual_negligible(xq: &XQuantities, tol: &TolerancePolicy) -> bool {
    tol.negligible(xq.residual().norm(), xq.x.norm())
}

/// `S_X G_X = 0`, as a containment `ker R_X ⊆ ker S_X` tested with the
/// principal-angle threshold against the natural size of `S_X`.
pub fn kernel_condition_from(triple: &PopovTriple, xq: &XQuantities, tol: &TolerancePolicy) -> bool {
    if xq.ker_r_x.ncols() == 0 {
        return true;
    }
    let leak = spectral_norm(&(&xq.s_x * &xq.ker_r_x));
    let scale =
        spectral_norm(triple.a()) * spectral_norm(&xq.x) * spectral_norm(triple.b()) + spectral_norm(triple.s());
    leak <= tol.angle_tol() * scale
}

pub fn kernel_condition_holds(triple: &PopovTriple, x: &Matrix, tol: &TolerancePolicy) -> Result<bool> {
    let xq = x_quantities(triple, x, tol)?;
    Ok(kernel_condition_from(triple, &xq, tol))
}

/// Which Riccati-type relation a candidate satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolutionClass {
    /// GDARE residual vanishes and `R_X` is nonsingular.
    Dare,
    /// GDARE residual vanishes, `R_X` singular, kernel condition holds.
    Cgdare,
    /// GDARE residual vanishes but the kernel condition fails.
    GdareOnly,
    /// `Π_X ⪰ 0` without solving the GDARE.
    DrlmiOnly,
    None,
}

impl SolutionClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolutionClass::Dare => "DARE",
            SolutionClass::Cgdare => "CGDARE",
            SolutionClass::GdareOnly => "GDARE_ONLY",
            SolutionClass::DrlmiOnly => "DRLMI_ONLY",
            SolutionClass::None => "NONE",
        }
    }

    /// DARE and CGDARE solutions.
    pub fn solves_cgdare(&self) -> bool {
        matches!(self, SolutionClass::Dare | SolutionClass::Cgdare)
    }
}

impl fmt::Display for SolutionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify_from(triple: &PopovTriple, xq: &XQuantities, tol: &TolerancePolicy) -> SolutionClass {
    if residual_negligible(xq, tol) {
        if !xq.is_r_x_singular() {
            SolutionClass::Dare
        } else if kernel_condition_from(triple, xq, tol) {
            SolutionClass::Cgdare
        } else {
            SolutionClass::GdareOnly
        }
    } else if is_psd(&xq.pi_x, tol) {
        SolutionClass::DrlmiOnly
    } else {
        SolutionClass::None
    }
}

pub fn classify_solution(triple: &PopovTriple, x: &Matrix, tol: &TolerancePolicy) -> Result<SolutionClass> {
    let xq = x_quantities(triple, x, tol)?;
    Ok(classify_from(triple, &xq, tol))
}

/// `Π_X ⪰ 0` within `psd_clip`.
pub fn drlmi_holds(triple: &PopovTriple, x: &Matrix, tol: &TolerancePolicy) -> Result<bool> {
    Ok(is_psd(&x_quantities(triple, x, tol)?.pi_x, tol))
}

/// `L(X) = Π_X − Π = [[AᵀXA − X, AᵀXB], [BᵀXA, BᵀXB]]`.
pub fn lx(triple: &PopovTriple, x: &Matrix) -> Result<Matrix> {
    expect_shape(x, "X", triple.n(), triple.n())?;
    let (a, b) = (triple.a(), triple.b());
    let top_left = a.transpose() * x * a - x;
    let top_right = a.transpose() * x * b;
    let bottom_right = b.transpose() * x * b;
    Ok(block2x2(&top_left, &top_right, &top_right.transpose(), &bottom_right))
}
