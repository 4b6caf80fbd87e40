//! Experiment runner for hierarchical message-passing GNNs: configuration,
//! dataset loading, per-seed runs, ablation sweeps and result files.

pub mod commands;
pub mod config;
pub mod error;
pub mod results;
pub mod run;

pub use commands::{
    cmd_gen_grid, cmd_hierarchy, cmd_sweep_hierarchy, cmd_sweep_levels, cmd_sweep_sparsity,
    cmd_train, Env, HierarchySummary, SweepRow, TrainSummary,
};
pub use config::{ExperimentConfig, Overrides, Task};
pub use error::CliError;
pub use run::{load_dataset, run_seed, Dataset, RunRecord, RunResult};
