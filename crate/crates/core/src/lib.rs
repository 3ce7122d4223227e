//! Numerical toolkit for rescaled mean curvature flow near the round compact
//! self-shrinkers `S¹(√2)` and `S²(2)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`shrinker`]: the shrinkers, Gaussian weight and area, excess, and the
//!   geometry of radial graphs.
//! * [`spectral`]: eigenvalues and eigenfunctions of the drift operator `L`,
//!   projections, and Weyl counting.
//! * [`drift_heat`]: the linear drift heat flow, log-convexity, three-annulus
//!   checks, gap selection, and the Duhamel right inverse of `∂ₜ − L`.
//! * [`flow`]: the nonlinear rescaled flow of radial graphs, the Gaussian
//!   distance `D_Σ`, and monotonicity audits.
//! * [`doubling`]: decay-order, doubling and infinite-order audits over
//!   trajectories.
//! * [`cli`]: configuration and command implementations behind the
//!   `shrinkflow` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod doubling;
pub mod drift_heat;
pub mod error;
pub mod export;
pub mod flow;
pub mod grid;
pub mod harmonics;
pub mod shrinker;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Grid, GridSpec};
pub use shrinker::{RadialGraph, Shrinker};
pub use spectral::{ModeVector, Spectrum};
