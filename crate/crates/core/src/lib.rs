//! Homogenized free-boundary velocities for Hele-Shaw flows
//! `V = g(x/eps, t/eps) |Du+|` in space-time periodic media.
//!
//! The crate is organized by subsystem:
//!
//! - [`medium`]: parsing, evaluation and auditing of periodic media `g(x, t)`
//! - [`geometry`]: planar traveling waves, cone domains, lattice covers
//! - [`barriers`]: closed-form radial barriers and thin-cylinder functions
//! - [`timescale`]: Lambert-W time rescalings
//! - [`homog1d`]: front ODEs, effective velocity, obstacle fronts, flatness
//! - [`hs2d`]: a strip simulator for the 2D free-boundary problem
//! - [`cli`]: the `hele-homog` command-line front end

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod barriers;
pub mod cli;
pub mod geometry;
pub mod homog1d;
pub mod hs2d;
pub mod medium;
pub mod quad;
pub mod timescale;

pub use medium::{Medium, MediumBounds, MediumError, MediumRef, MediumSpec};
