//! Experiment runner: named presets over the estimation pipeline, strict JSON
//! configuration, and report emission.

pub mod config;
pub mod overrides;
pub mod presets;
pub mod runner;

pub use config::{parse_config, ExperimentPreset};
pub use presets::{all_presets, find_preset};
pub use runner::{run, ExperimentReport, RunOptions};
