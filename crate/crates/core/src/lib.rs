//! Capacity region, strong-converse exponent and feedback-code simulation
//! for two-user degraded broadcast channels.

#![allow(clippy::needless_range_loop)]

pub mod capacity;
pub mod channel;
pub mod cli;
pub mod converse;
pub mod dist;
pub mod error;
pub mod exponent;
mod float_serde;
pub mod grid;
pub mod info;
pub mod optim;
pub mod simulator;

pub use channel::{DegradedBroadcastChannel, StochasticMatrix};
pub use dist::{JointUXYZ, SimplexVector};
pub use error::{Error, Result};
