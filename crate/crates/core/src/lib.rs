//! Skew-resilient row redistribution for data-parallel links, with a
//! deterministic simulator to compare redistribution policies.

pub mod cli;
pub mod config;
pub mod error;
pub mod fraction;
pub mod report;
pub mod routing;
pub mod simulator;
pub mod skew_models;
pub mod state_machine;
pub mod types;
pub mod workload;

pub use error::{Error, Result};
