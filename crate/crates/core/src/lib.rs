//! Block-model analysis of interbank lending networks.
//!
//! The crate aggregates transaction records into networks, fits directed
//! stochastic block models by minimizing description length, labels the
//! inferred two-block structure, and compares it against classical
//! core-periphery detectors.

pub mod bankstrat;
pub mod baselines;
pub mod classify;
pub mod inference;
pub mod knockout;
pub mod netcore;
pub mod sbm;
pub mod synth;
pub mod seed;
