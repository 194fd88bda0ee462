//! Robust quantum control pulses by direct, constrained trajectory
//! optimization, with several estimators of first-order error
//! susceptibility.

pub mod algebra;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nlp;
pub mod parallel;
pub mod sample;
pub mod trajopt;

pub use error::{Error, Result};
