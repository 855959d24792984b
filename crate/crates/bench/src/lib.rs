//! Parking-lot pricing experiments for the online CVaR learners: the
//! scenario catalog, a seeded multi-run harness with CSV output, and the
//! run configuration used by the `raol` binary.

pub mod catalog;
pub mod config;
pub mod error;
pub mod harness;

pub use catalog::{builtin_scenarios, find_scenario, Scenario};
pub use error::{BenchError, Result};
pub use harness::{run_experiment, summarize, Arm, ExperimentConfig, ExperimentResult, RunSummary};
