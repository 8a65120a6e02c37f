//! Experiment harness for predictive coding associative memories: flat
//! configuration files with sweeps, experiment orchestration, gradient
//! checks, metrics tables and image grids.

pub mod config;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod grid;
pub mod metrics;

pub use config::{ExperimentConfig, RawConfig, Task};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, RunArtifacts};
