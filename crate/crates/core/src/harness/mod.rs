//! Experiment runner: scenarios, sweeps over seeds and one parameter,
//! cross-evaluation of every solution with all estimators, and CSV/JSON
//! output.

mod config;
mod report;
mod run;
mod scenario;
mod solution;

pub use config::{load_config, parse_config, ExperimentConfig, Scenario, SpecParams, SweepConfig, SweepParam};
pub use report::{compare, report_pareto, report_pauli_scan, ComparisonRow, ComparisonSummary, Frontier, FrontierPoint, PauliRow};
pub use run::{read_rows, run, run_cell, write_csv, write_rows, CellOutput, ResultRow, RunMetadata, RunOutput};
pub use scenario::{build_spec, scenario_hadamard, scenario_iswap, HADAMARD_KNOTS, HADAMARD_DT, ISWAP_SEEDS};
pub use solution::{cross_evaluate, MetricBlock, Solution, SolverSummary, Verification};
