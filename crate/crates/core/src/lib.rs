//! Entrywise-accurate solver for symmetric diagonally dominant M-matrix
//! (SDDM) systems `L x = b` with nonnegative `b`.
//!
//! Every entry of the returned `x̃` lies within a factor `e^{±ε}` of the true
//! solution, including entries many orders of magnitude below `||x||`. The
//! pipeline is:
//!
//! 1. [`cover::build_cover`] builds a low-diameter cover under the
//!    probability distance `D(i,j) = -log_{nU}((L^{-1})_{ij}) + 2`;
//! 2. [`decay::threshold_decay`] repeatedly harvests the large entries of a
//!    shrinking system and folds them into its right-hand side;
//! 3. each iteration solves only on the boundary-expanded active region
//!    ([`partial`]) with a normwise solver ([`normwise`]).
//!
//! [`oracle`] is an exact rational ground truth used by the tests and the
//! `verify` command.

pub mod cover;
pub mod decay;
pub mod distance;
pub mod exec;
pub mod generate;
pub mod index_set;
pub mod io;
pub mod matrix;
pub mod normwise;
pub mod oracle;
pub mod partial;
pub mod solve;
pub mod vector;

pub use cover::{build_cover, default_params, Cover, CoverError, CoverMode, CoverParams};
pub use distance::{probability_distance, ProbDistance, Scale};
pub use exec::Execution;
pub use index_set::IndexSet;
pub use matrix::{from_dense, validate_sddm, SddmMatrix, ValidationError};
pub use normwise::{normwise_solve, NormwiseConfig, NormwiseError, NormwiseSolution};
pub use solve::{sddm_solve, solve_with_cover, SolveError, SolveOptions, SolveReport};
pub use vector::ApproxVector;
