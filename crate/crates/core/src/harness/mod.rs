//! Replicated twin experiments: configuration, presets, the runner, metrics
//! and the CSV/JSON artifacts.

mod config;
mod metrics;
mod ot_demo;
mod output;
pub mod presets;
mod runner;

pub use config::{ExperimentConfig, MetricOptions, OUTPUT_DIR_ENV};
pub use metrics::{compute_metrics, BiasMode, MetricSeries};
pub use ot_demo::{discretize, run_ot_demo, CouplingSummary, OtDemo, DEMO_ETAS, DEMO_GAMMAS};
pub use output::{
    average_metrics, write_replicate, write_summary, AggregateSummary, Failure, MethodSummary,
    ReplicateSummary, Summary, SCHEMA_VERSION,
};
pub use presets::{preset, PRESET_NAMES};
pub use runner::{run_experiment, run_experiment_in, run_replicate, MethodRun, ReplicateRun, RunReport};
