//! Experiment orchestration: per-trial pipeline, Monte-Carlo sweeps,
//! convergence traces and CSV emission.

mod config;
mod output;
mod sweep;
mod trial;

pub use config::{ConfigFile, ExperimentConfig, Method, SweepAxis};
pub use output::{convergence_csv, format_float, sweep_csv, CONVERGENCE_HEADER, SWEEP_HEADER};
pub use sweep::{convergence, first_below, nmse, quantile, run_trials, sweep, ConvergenceRow, SweepRow};
pub use trial::{run_trial, trial_rng, TrialRecord};
