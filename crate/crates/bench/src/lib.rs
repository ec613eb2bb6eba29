//! Experiment harness for the composite solvers: builds synthetic or LIBSVM problems, runs the
//! configured solvers from one shared starting point, and writes CSV traces, a summary table,
//! a metadata sidecar and optional bound-verification reports.

pub mod config;
pub mod experiment;
pub mod output;
pub mod verify;

pub use config::{ExperimentConfig, ProblemSpec, SolverSpec};
pub use experiment::{build_problem, run_experiment, BuiltProblem, Cell, ExperimentReport};
pub use output::{csv_string, emit_csv, summary_rows, summary_table, write_outputs, SummaryRow};
pub use verify::{verify_bounds, BoundReport, Outcome};
