//! Seeded Monte-Carlo harness for the sweep, acquisition, recovery and
//! beamforming pipeline.

pub mod analysis;
mod config;
pub mod rng;
mod run;

pub use config::{ExperimentConfig, PipelineStop};
pub use run::{
    aggregate, quantile, run_experiment, run_trial, sidecar_path, trial_channels, write_experiment, write_rows_csv,
    ExperimentOutput, ResultRow, TrialOutcome,
};
