//! Sample-budget planning and variance analysis for randomized benchmarking.

pub mod bounds;
pub mod cli;
pub mod clifford;
pub mod error;
pub mod liouville;
pub mod pauli;
pub mod planner;
pub mod simulate;
pub mod twirl;

pub use error::{Error, Result};
