//! Nodal counts of eigenfunctions of the restricted fractional Laplacian.
//!
//! The crate constructs and verifies a counterexample to "the second
//! eigenfunction has exactly one sign change" for the perturbed restricted
//! fractional Laplacian on `(-1, 1)` with a non-convex triple-well potential.
//!
//! Layout:
//!
//! - [`matmodel`] — the exact 3×3 reduced matrix model: phase diagram of
//!   second-eigenvector sign patterns, Perron positivity, eigen-sensitivities.
//! - [`discretize`] — grids on unions of intervals and the dense collocation
//!   matrix of `(-Δ)^s_res`, the exterior kernel `κ`, potentials.
//! - [`eigen`] — dense symmetric eigensolves and grid-function calculus.
//! - [`perturb`] — the rescaled product-space operator `T̄(ε)`, the correction
//!   matrix `M̂` and verification of the splitting order.
//! - [`wells`] — finite / infinite potential wells, energies, δ-sweeps, the
//!   exterior-harmonic split and the end-to-end counterexample.
//! - [`cli`] — named experiments, config parsing, artifacts and exit codes.

pub mod cli;
pub mod config;
pub mod discretize;
pub mod eigen;
pub mod error;
pub mod fit;
pub mod io;
pub mod matmodel;
pub mod perturb;
pub mod wells;

pub use error::{Error, Result};
