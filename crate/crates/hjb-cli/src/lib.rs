//! Experiment orchestration: configuration, suite execution with crash
//! isolation, persistence of reports and grid snapshots, and long-format
//! plot data emission.

pub mod config;
pub mod plots;
pub mod suites;

pub use config::ExperimentConfig;
pub use suites::{run_experiment, RunRecord, SuiteRecord};
