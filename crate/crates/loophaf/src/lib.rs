//! Hafnians, loop hafnians, and Gaussian moments.
//!
//! The hafnian of an even-dimensional complex symmetric matrix is the sum
//! over all perfect matchings of the products of matched entries; the loop
//! hafnian extends the sum to partitions into pairs and singletons, with
//! singletons weighted by a loop vector (or by the diagonal). This crate
//! computes them by three independent routes and cross-verifies the results:
//!
//! * [`combinatorial`] — direct enumeration of the matchings, the ground
//!   truth at desk scale;
//! * the derivative route in [`genfun`] — loop hafnians of replicated
//!   ("extended") matrices as scaled Taylor coefficients of
//!   `exp(x'Sx/2 + v'x)`;
//! * the generating-function route in [`genfun`] — a whole batch of loop
//!   hafnians read off one series
//!   `exp(v'(1-ZS)^{-1}Zv/2) / sqrt(det(1-ZS))`.
//!
//! [`series`] implements the truncated multivariate power-series ring behind
//! the last two routes, and [`moments`] exposes the classical correspondence
//! between Gaussian joint moments and (loop) hafnians of the covariance, with
//! a seeded Monte-Carlo estimator as an independent statistical check.
//!
//! Brute-force sums, verification sweeps and Monte-Carlo sampling run in
//! parallel with the default `parallel` feature (rayon); disabling default
//! features gives a fully sequential build. Either way the work is split into
//! the same deterministic chunks and folded in a fixed order, so numeric
//! results are bit-identical across thread counts and between the two builds.

pub mod combinatorial;
pub mod error;
pub mod genfun;
pub mod instances;
pub mod matrix;
pub mod moments;
pub mod series;

mod parallel;

pub use error::{Error, Result};
pub use matrix::{LoopVector, MultiIndex, SymmetricMatrix};
pub use num_complex::Complex64;
