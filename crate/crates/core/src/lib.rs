//! Diffusion-based iteration for sparse linear systems and stationary vectors.
//!
//! A problem is always brought to the fixed-point form `X = P·X + F₀`
//! ([`FixedPointProblem`]). The [`engine`] then repeatedly picks a node,
//! banks its pending fluid into the history vector and pushes it along the
//! node's out-links. The history converges to `X` for any schedule that
//! visits every node infinitely often, as long as the operator contracts.
//!
//! - [`sparse`]: matrices, vectors and operators with an implicit rank-one term.
//! - [`conditions`]: diagonal dominance, fluid reduction and related checks.
//! - [`transforms`]: problem builders and exact link elimination.
//! - [`engine`]: diffusion state, schedules, termination and traces.
//! - [`baselines`]: Jacobi, Gauss-Seidel, affine power iteration, dense LU.
//! - [`distsim`]: deterministic simulation of asynchronous partitioned runs.

pub mod baselines;
pub mod conditions;
pub mod distsim;
pub mod engine;
mod error;
mod problem;
pub mod sparse;
pub mod transforms;

pub use error::{Error, Result};
pub use problem::{FixedPointProblem, ProblemForm};
pub use sparse::{DenseVector, OperatorSpec, RankOne, SparseMatrix};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
pub struct ReadmeDoctests;
