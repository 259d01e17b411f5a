//! Monte Carlo experiment runner behind the `isabc` binary.

pub mod config;
pub mod experiment;

pub use config::{ExperimentConfig, Sweep};
pub use experiment::{measure_runtime, run_experiment, run_trials, summarize, CellSummary, RunOutcome, TrialRecord};
