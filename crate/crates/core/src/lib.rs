//! Simulation of autonomous (reservoir-engineered) stabilization of AKLT
//! states in chains of superconducting qutrits coupled through shared
//! microwave cavities.

// `!(x > 0.0)` style checks are used on purpose: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod analysis;
pub mod error;
mod generator;
pub mod integrate;
pub mod mesolve;
pub mod protocol;
pub mod scenario;
pub mod spin;
pub mod trajectories;

pub use error::{Error, Result};
