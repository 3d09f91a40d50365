//! Spectral-Galerkin laboratory for semilinear dissipative SPDEs with
//! diagonal noise on the unit interval.

// `!(x > 0.0)` is the NaN-rejecting form used throughout parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod integrator;
pub mod kolmogorov;
pub mod models;
pub mod moments;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod stoch_conv;

pub use error::{Error, Result};
