//! Nonparametric kernel estimation of spot volatility from discretely
//! observed log prices, with optimal bandwidth and kernel selection.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bandwidth;
pub mod covariance;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod kernel_optimizer;
pub mod kernels;
pub mod numeric;
pub mod simulate;
pub mod volvol;

pub use covariance::{CovKind, CovStructure};
pub use error::{Error, Result};
pub use kernels::Kernel;
