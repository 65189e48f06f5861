//! Experiment orchestration: configuration, execution and reporting.

pub mod config;
pub mod report;
pub mod run;

pub use config::{BudgetSpec, ExperimentConfig, ExperimentKind, Method, PhantomSpec};
pub use report::{emit_report, read_results_csv, summarize, write_results_csv, SummaryRow};
pub use run::{run_experiment, run_experiment_with, Condition, ResultRow, ResultTable, RowFailure, StabilityRow};
