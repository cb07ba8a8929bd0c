//! Simulation of cooperative anti-jamming receivers: frame generation,
//! jamming-subspace estimation, projection and zero-forcing detection, and a
//! Monte Carlo harness over a catalog of scenarios.

pub mod analysis;
pub mod caj;
pub mod channel;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod mathcore;
pub mod signal;

pub use error::{CajError, Result};
