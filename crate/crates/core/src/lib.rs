//! Lower-deviation rate constants for level sets of branching random
//! walks, with simulation and rare-event cross-checks.

pub mod deviation;
pub mod distributions;
pub mod error;
pub mod numeric;
pub mod rare_event;
pub mod rate_fn;
pub mod rng;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
