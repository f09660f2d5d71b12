//! Simulation engine for a two-cavity optomechanical phonon laser: mean-field
//! dynamics, fixed points and lasing thresholds, and entanglement of the
//! Gaussian fluctuations around the classical orbit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod fixed_points;
pub mod gaussian;
pub mod model;
pub mod paths;
pub mod phase;
pub mod ode;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{ClassicalState, DriftConvention, ModelParams};
