//! Experiment runner for `aqua-qkd-core`: JSON configs, CSV/JSON output,
//! parallel transport and a byte-framed classical channel.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod format;
pub mod framed;
pub mod io;
pub mod parallel;

pub use config::{ExperimentConfig, OutputFormat, Scenario};
pub use error::{AppError, Result};
pub use experiments::{jerlov_extrapolate, run_scenario, Report, SweepRow};
