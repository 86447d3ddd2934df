//! Racing-line optimization for closed and open tracks.
//!
//! A candidate trajectory is described by lateral offsets of a handful of
//! nodes placed along the track center line. Each candidate is smoothed with
//! a cubic spline, resampled, and scored by the minimum time needed to drive
//! it under a friction-circle vehicle model with a rear-wheel-drive force
//! cap. A Gaussian-process surrogate over the offsets then guides the search
//! for the fastest trajectory with expected improvement (or its noisy,
//! fantasy-based variant).
//!
//! Module map:
//!
//! * [`track`]: center line loading, node placement, offsets to waypoints,
//!   spline fitting and resampling.
//! * [`speed`]: the friction-circle minimum-time speed solver.
//! * [`gp`]: Gaussian-process regression with marginal-likelihood fitting.
//! * [`bayesopt`]: acquisition functions and the optimization loop.
//! * [`baseline`]: uniform random search and multi-run comparisons.
//! * [`par`]: data-parallel helpers with a sequential fallback.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod bayesopt;
mod error;
pub mod geometry;
pub mod gp;
pub mod lap;
mod linalg;
mod optim;
pub mod par;
mod qmc;
pub mod spline;
pub mod speed;
pub mod track;

pub use error::{Error, Result};
pub use geometry::Vec2;
