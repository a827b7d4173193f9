//! Declarative experiments: a TOML config describes how to build each
//! environment, which estimator and policies to use, an optional sweep over
//! one parameter and a batch of seeds. Running it writes CSV results and a
//! manifest.

mod config;
mod run;
mod validate;

pub use config::{
    EnvironmentConfig, EstimatorConfig, EvaluationConfig, ExperimentConfig, LoggingConfig, OutputConfig,
    PartitionMethod, PolicyConfig, SeedConfig, SourceKind, SweepConfig, SweepParameter, DEFAULT_ACTIONS, DEFAULT_USERS,
};
pub use run::{
    apply_sweep, build_cell, config_hash, default_out_dir, evaluate_cell, prepare, run_cells, run_experiment, seeds,
    sweep_points, Cell, CellOutcome, CellPolicy, PolicyOutcome, Prepared, RunOptions, RunReport, ALLOCATION_HEADER,
    JOBS_ENV, OUT_ENV, SUMMARY_HEADER, SUPPLY_HEADER, TRACE_HEADER,
};
pub use validate::{check_config, load_config, parse_config, validate_config, Diagnostic};

/// The built-in small-scale demo: three users, five actions, random supply.
pub const SMALL_SCALE_PRESET: &str = include_str!("../../presets/small_scale.toml");

pub fn small_scale_config() -> ExperimentConfig {
    parse_config(SMALL_SCALE_PRESET).expect("built-in preset parses")
}

/// Runs the built-in small-scale demo, writing per-step traces and
/// allocation shares.
pub fn run_small_scale_demo(options: &RunOptions) -> crate::Result<RunReport> {
    run_experiment(&small_scale_config(), options)
}
