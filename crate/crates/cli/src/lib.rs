//! Config-driven experiments on top of `pulsecal-core`: TOML experiment
//! files, the `calibrate`, `sweep`, `stability` and `ramsey` runs, and their
//! CSV output.

// `!(x >= 0.0)` style checks reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use experiments::{cmd_calibrate, cmd_ramsey, cmd_stability, cmd_sweep, Overrides};
pub use output::OutDir;
