//! Scenarios, the Monte Carlo experiment runner, and run CSV I/O.

mod config;
mod experiment;
mod report;
mod scenario;

pub use config::parse_config;
pub use experiment::{run_algorithm, run_experiment, run_instance, ExperimentOptions, OFFLINE_TOL};
pub use report::{
    format_float, mean_and_stderr, read_reports_csv, summarize, write_reports_csv, write_summary_csv, AlgoId, AlgoSpec,
    GroupSummary, RegretReport, ReportRow, CSV_HEADER,
};
pub use scenario::{Instance, LowerBoundParams, PlanningParams, QuadrotorParams, Scenario, ScenarioKind, StepRule};
