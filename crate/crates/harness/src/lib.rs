//! Experiment orchestration for the capi-core learners: INI configuration,
//! seeded multi-run execution, per-seed CSV curves, summaries and
//! long-format plot data.

pub mod config;
pub mod error;
pub mod runner;
pub mod summary;

pub use config::{parse_config, AlgorithmParams, CapiSettings, ExperimentConfig, ALGORITHMS};
pub use error::{HarnessError, Result};
pub use runner::{run_experiment, run_seed, SeedResult};
pub use summary::{emit_plot_data, AlgorithmSummary, PlotRow, Summary};
