//! Numerical laboratory for the Aviles-Giga energy on convex planar domains.
//!
//! Modules, bottom up:
//! - [`geometry`]: convex domains with distance, projection, normal and
//!   curvature queries, and comparison with unit disks.
//! - [`fields`]: node-centered grid fields with cut-cell masks, finite
//!   differences and quadrature.
//! - [`energy`]: the energy and the integrals it controls.
//! - [`entropy`]: entropy pairs and their divergence identity.
//! - [`competitor`]: the mollified distance function used as a low-energy
//!   test field.
//! - [`minimize`]: penalized nonlinear conjugate gradient minimization.
//! - [`verify`]: stability reports and exponent sweeps.

pub mod competitor;
pub mod energy;
pub mod entropy;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod minimize;
pub mod numerics;
pub mod ramp;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{best_fit_ball, disk_symmetric_difference, BoundarySample, ConvexDomain, Shape, Tolerances, Vec2};
