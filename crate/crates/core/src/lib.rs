//! Trace-driven DRAM timing simulator with a charge-aware activation
//! latency table in the memory controller.

pub mod dram;
pub mod error;

pub use error::{ConfigError, Error, MapError, ParseError, Result};
pub mod analytics;
pub mod batch;
pub mod config;
pub mod controller;
pub mod cpu;
pub mod energy;
pub mod policy;
pub mod sim;
pub mod trace;
pub use config::RunConfig;
