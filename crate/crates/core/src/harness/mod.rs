//! Experiment orchestration: configuration, datasets, training runs, grid
//! evaluation and result files.

pub mod config;
pub mod evaluate;
pub mod output;
pub mod problem;
pub mod run;

pub use config::{
    BarrierMode, DataConfig, EvalGrid, ExperimentConfig, ExperimentKind, MarketConfig, MethodName, NetworkShape,
    PayoffConfig, SweepConfig, TrainSettings, SCHEMA_VERSION,
};
pub use evaluate::{evaluate_on_grid, Approximator, EvalReport, GridRow, Summary};
pub use output::{emit_results, medians, read_results, MedianRow, ARTIFACT_VERSION};
pub use problem::{generate_dataset, oracle_at, GridOracle, OraclePoint};
pub use run::{run_experiment, run_smoothing_sweep, CellFailure, RunOutput, SweepRow, Variant};
