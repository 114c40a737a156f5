//! Experiment orchestration: configuration, the per-seed pipeline, metrics,
//! and aggregated reports.

pub mod config;
pub mod metrics;
pub mod pipeline;
pub mod report;

pub use config::{preset, ExperimentConfig, Tolerances, PRESETS};
pub use pipeline::{SeedReport, SeedRun};
pub use report::{run_experiment, ComparisonReport};
