//! Numerical laboratory for Korn's interpolation and second inequalities on
//! thin shells of variable thickness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ansatz;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod geometry;
pub mod harmonic;
pub mod korn;
pub mod linalg;
pub mod operators;
pub mod stencil;
pub mod strip;

pub use error::{KornError, Result};
