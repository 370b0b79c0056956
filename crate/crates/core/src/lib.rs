//! D-optimal sensor placement for Gaussian-process regression.
//!
//! Candidate locations ([`points`]) and a squared-exponential kernel
//! ([`kernel`]) define an `n × n` covariance matrix K. Choosing `k` sensors
//! means choosing a `k × k` principal submatrix K₁₁ that maximizes
//!
//! ```text
//! φ_D(S) = logdet(I_k + η⁻² K₁₁)
//! ```
//!
//! The [`select`] module implements column subset selection on K through the
//! Golub–Klema–Stewart (GKS) recipe: find an orthonormal basis for the
//! dominant eigenspace (exactly, with a randomized Nyström sketch, or with a
//! pivoted Cholesky factor from [`nystrom`]) and pick rows of it with QR
//! column pivoting ([`linalg`]). A greedy log-determinant maximizer and
//! brute-force/random baselines are included for comparison. [`gp`] scores
//! selections and reconstructs fields from sensor data; [`bounds`] evaluates
//! the theoretical guarantees for each method on concrete instances.

// `!(x > t)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod nystrom;
pub mod points;
pub mod rng;
pub mod select;

pub use error::{Error, Result};
pub use kernel::{Covariance, KernelFamily, KernelOperator, KernelSpec, SymmetricMatrix};

pub use nystrom::{FactorMethod, LowRankFactor, Pivoting};
pub use points::PointSet;
pub use select::{Method, SelectionResult};

