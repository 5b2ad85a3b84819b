//! Adaptive sketch-size randomized preconditioned solvers for
//! quadratically regularized least squares.
//!
//! The building blocks are
//!
//! - [`linalg`]: dense kernels (Cholesky, Walsh-Hadamard, eigensolver);
//! - [`problem`]: the problem `min ½⟨x, Hx⟩ − ⟨B, x⟩` with `H = AᵀA + ν²Λ`,
//!   exact solutions, effective dimension, synthetic and CSV data;
//! - [`embeddings`]: Gaussian, SRHT and SJLT sketches plus critical sketch sizes;
//! - [`preconditioner`]: factorization of the sketched Hessian by the dense or
//!   Woodbury path;
//! - [`solvers`]: CG, IHS, PCG, Polyak-IHS and the adaptive sketch-size loop;
//! - [`diagnostics`]: Monte Carlo checks of subspace-embedding behaviour.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod embeddings;
pub mod error;
pub mod linalg;
pub mod preconditioner;
pub mod problem;
pub mod rng;
pub mod solvers;

pub use embeddings::{SketchFamily, SketchSpec, SketchedData};
pub use error::{Error, Result};
pub use linalg::{DenseMatrix, DiagonalMatrix};
pub use preconditioner::{FactorPath, Preconditioner};
pub use problem::{ExactSolution, RegularizedProblem};
pub use solvers::{AdaptiveConfig, AdaptiveMethod, SolverTrace, TraceEvent, TraceRecord};
