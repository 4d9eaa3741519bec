//! The task benchmark: quick estimates against full training runs, and
//! the CSV, JSON and SVG reports comparing them.

mod config;
mod report;
mod runner;

pub use config::{parse_task_list, BenchConfig, BenchData, DataSource};
pub use report::{
    emit_report, pipeline_pearson, scatter_svg, summarize, write_report_csv, write_runs_csv, Summary, REPORT_COLUMNS,
};
pub use runner::{run_benchmark, run_benchmark_on, run_task, BenchReport, RunOptions, TaskRow};
