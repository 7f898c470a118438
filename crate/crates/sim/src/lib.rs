//! Scenario generation, Monte Carlo experiments and CSV output for
//! multi-sensor PHD/MB/LMB fusion.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod scenario;

pub use config::{ExperimentConfig, FilterKind, Mode, Variant};
pub use error::{SimError, SimResult};
pub use experiment::{run_experiment, run_variants, ResultTable, RunOptions, StepRecord};
pub use output::write_results;
