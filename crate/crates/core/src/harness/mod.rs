//! Experiment plumbing: run configurations, single runs in each selection
//! mode, hyperparameter sweeps and the naive-versus-entropy report.

mod config;
mod grid;
mod report;
mod run;

pub use config::{activation_name, parse_activation, DataSource, Mode, ModelSpec, RunConfig};
pub use grid::{
    dataset_group, in_sweep_pool, mean_std, mode_stats, read_rows, read_rows_csv, run_grid, sweep_threads, write_rows,
    write_rows_csv, GridRow, GridSpec, ModeStats, THREADS_ENV,
};
pub use report::{build_report, Report, ReportRow, SIGNIFICANCE};
pub use run::{load_csv, load_source, run_single, run_traced, write_trace, AnyModel, RunResult, MODEL_STREAM};
