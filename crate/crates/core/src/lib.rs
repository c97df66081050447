//! Wave propagation, pilot-wave kinematics and classical-limit tooling for
//! external/internal wave-function experiments.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fields;
pub mod io;
pub mod madelung;
pub mod minplus;
pub mod oracles;
pub mod propagators;
pub mod rng;
pub mod scenarios;
pub mod spectral;
pub mod stats;
pub mod trajectories;
pub mod units;

pub use error::{Result, SimError};
