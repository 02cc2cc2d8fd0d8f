//! Numerical workbench for fitted Q-iteration with linear function
//! approximation.
//!
//! The crate has two halves that share one set of numeric primitives:
//!
//! * exact machinery for small finite-horizon tabular MDPs (optimal Q tables,
//!   occupation measures, occupancy norms, the telescope decomposition of a
//!   policy's suboptimality, multi-step transition operators, and sampled
//!   stability/curvature diagnostics), and
//! * the simulation stack for the continuous benchmark: a mountain-car
//!   environment with trigonometric product features, ridge-regularized
//!   fitted Q-iteration, Monte-Carlo policy evaluation, and log-log rate
//!   fitting for convergence studies.
//!
//! Everything here is `no_std + alloc`: computation only, no IO. File
//! formats, the CLI, and parallel orchestration live in the companion crate.
//! All randomness flows through [`rng`], which derives independent ChaCha8
//! streams from a single master seed, so every result is reproducible
//! bit-for-bit from (code version, config, seed).

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod features;
pub(crate) mod fmath;
pub mod linalg;
pub mod mdp;
pub mod mountain_car;
pub mod online;
pub mod ridge;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
