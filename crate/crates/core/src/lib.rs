//! Uniqueness of state reconstruction for linear dynamical systems observed
//! through a rank-deficient projection.
//!
//! The null-space chain N₁ = null(P), N_{k+1} = N₁ ∩ L_k(N_k) measures how
//! many measurements are needed before the initial state is determined;
//! the extended matrix E and the block trajectory operators give the
//! matching rank tests and a least-squares reconstruction.

pub mod chain;
pub mod error;
pub mod experiments;
pub mod io;
pub mod matrix;
pub mod models;
pub mod observability;
pub mod subspace;
pub mod system;

pub use error::{Error, Result};
pub use matrix::{DenseMatrix, RankTolerance};
pub use subspace::Subspace;
pub use system::{Dynamics, GridSpec, SystemModel};
