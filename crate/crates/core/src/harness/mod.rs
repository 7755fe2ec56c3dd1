//! Experiment harness: configuration, datasets, the streaming loop, metrics
//! and file output.

pub mod config;
pub mod data;
pub mod metrics;
pub mod output;
pub mod runner;

pub use config::{DatasetKind, ExperimentConfig, FilterKind, SweepOrderConfig};
pub use data::{Dataset, FeatureMap, TanksData, TrueWeights};
pub use metrics::{compute_metrics, MetricsRow};
pub use runner::{run_experiment, RunResult};
