//! Randomized second-order optimization with effective-dimension-sized sketches.
//!
//! The crate solves composite problems `f = f0 + g` where `f0` exposes a cheap
//! n×d Hessian square-root `B(x)` (so `∇²f0 = BᵀB`) and `g` is a μ-strongly
//! convex regularizer or barrier with structured Hessian. Newton systems are
//! solved against the sketched Hessian
//!
//! ```text
//! H_S(x) = (S B(x))ᵀ (S B(x)) + ∇²g(x)
//! ```
//!
//! for a random m×n embedding `S` (CountSketch-style SJLT, SRHT, or row
//! sampling). The sketch size can stay near the effective dimension
//! `trace(∇²f0 (∇²f0 + μI)⁻¹)` instead of the ambient dimension; the adaptive
//! solver discovers that size by doubling `m` whenever an iteration fails its
//! progress test.
//!
//! Modules:
//! - [`linalg`]: dense primitives, Cholesky, Woodbury solve, fast Walsh-Hadamard
//! - [`sketch`]: the random embeddings
//! - [`problems`]: the composite objectives (ridge, logistic, barriers, ...)
//! - [`newton`]: sketched Newton steps, decrements, line search, rate constants
//! - [`solvers`]: fixed-size and adaptive sketched Newton plus GD/NAG/Newton baselines
//! - [`data`]: LIBSVM parsing, Gaussian kernels, synthetic spectra
//! - [`harness`]: declarative experiment runner with CSV/JSON traces

pub mod data;
pub mod harness;
pub mod linalg;
pub mod newton;
pub mod problems;
pub mod sketch;
pub mod solvers;

pub use linalg::{Matrix, Vector};
