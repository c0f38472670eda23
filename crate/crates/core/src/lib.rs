//! Stationary mean-field equilibrium of a regime-switching irreversible
//! investment industry.
//!
//! The pipeline runs prices -> investment thresholds -> stationary firm-size
//! law -> aggregate production, and closes it with a fixed point. Monte Carlo
//! simulation of the reflected capacity process and the concentration and
//! firm-value indicators sit on top.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod equilibrium;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod params;
pub mod power;
pub mod quad;
pub mod roots;
pub mod simulate;
pub mod stationary;
pub mod sweep;
pub mod threshold;

pub use equilibrium::{solve_equilibrium, Equilibrium, EquilibriumOptions};
pub use error::{Error, Result};
pub use exec::Execution;
pub use params::{ChainLaw, ModelParams, Regime, RegimeParams, ValidationReport};
pub use roots::CharRoots;
pub use stationary::StationaryLaw;
pub use threshold::{solve_thresholds, ThresholdSolution};
