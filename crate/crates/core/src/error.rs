use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} contains a non-finite entry")]
    NonFinite { what: String },

    #[error("{what} is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { what: String, asymmetry: f64 },

    #[error("{what} not positive semidefinite (most negative eigenvalue {min_eigenvalue:.6e})")]
    NotPositiveSemidefinite { what: String, min_eigenvalue: f64 },

    #[error("invalid tolerance policy: {0}")]
    InvalidTolerance(String),

    #[error("Stein equation has no solution (least-squares residual {residual:.3e})")]
    Inconsistent { residual: f64 },

    #[error("Stein equation solution is not unique ({dim}-dimensional homogeneous family)")]
    Underdetermined { dim: usize },

    #[error("candidate does not solve the Stein equation (residual {residual:.3e})")]
    SteinResidualTooLarge { residual: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("subspace is not output-nulling for the quadruple")]
    NotOutputNulling,

    #[error("feedback is not a friend of the subspace")]
    NotAFriend,

    #[error("subspace is not invariant under the map")]
    NotInvariant,

    #[error("evaluation point {re}+{im}i is within {distance:.3e} of a pole")]
    PoleTooClose { re: f64, im: f64, distance: f64 },

    #[error("trajectory diverged at step {step} (state norm {norm:.3e})")]
    DivergentTrajectory { step: usize, norm: f64 },

    #[error("expected {expected} desired poles, got {found}")]
    DesiredSetSizeMismatch { expected: usize, found: usize },

    #[error("desired pole set is not closed under complex conjugation")]
    ConjugationViolation,

    #[error("pole placement failed: {0}")]
    PlacementFailed(String),

    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
