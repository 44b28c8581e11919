//! Experiment driver: configuration, district runs against a baseline,
//! the blackbox convergence suite and parameter sweeps.

pub mod blackbox;
pub mod config;
pub mod fleet;
pub mod outputs;
pub mod run;
pub mod sweep;

pub use blackbox::run_blackbox_suite;
pub use config::{parse_override, ExperimentConfig, Mode};
pub use outputs::RunOutputs;
pub use run::{load_traces, run_district};
pub use sweep::{run_sweep, SweepOutputs};

use crate::error::Result;

/// Runs `config` in its configured mode.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutputs> {
    match config.mode {
        Mode::Blackbox => run_blackbox_suite(config),
        _ => run_district(config),
    }
}
