//! Constrained generalized discrete algebraic Riccati equations.
//!
//! The crate covers the discrete-time LQ problem with a positive semidefinite
//! but possibly singular Popov matrix: the Riccati difference iteration and its
//! minimal solution, the Stein equation, the geometric subspaces attached to a
//! solution, the Popov function, and pole assignment through the free part of
//! the optimal control.

pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod numerics;
pub mod popov;
pub mod riccati;
pub mod spectral;
pub mod stabilize;
pub mod stein;

pub use error::{Error, Result};
pub use numerics::{Matrix, Subspace, TolerancePolicy};
pub use popov::{PopovTriple, SolutionClass, XQuantities};
