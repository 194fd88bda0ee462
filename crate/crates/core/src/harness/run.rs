use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nlp::{solve, SolverOptions};
use crate::parallel;
use crate::trajopt::{analyze_iterates, build, IterateStats};

use super::config::{ExperimentConfig, Scenario, SpecParams, SweepParam};
use super::scenario::build_spec;
use super::solution::{cross_evaluate, Solution};

/// One line of `results.csv`. Metric columns are empty only when the cell
/// failed before producing controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub status: String,
    /// Final program violation within the solver's feasibility tolerance.
    pub feasible: bool,
    pub violation: Option<f64>,
    pub fidelity: Option<f64>,
    pub e_fine: Option<f64>,
    pub e_adjoint: Option<f64>,
    pub e_toggling0: Option<f64>,
    pub e_toggling4: Option<f64>,
    pub e_universal0: Option<f64>,
    pub max_du: Option<f64>,
    pub max_ddu: Option<f64>,
    pub wall_time_s: f64,
}

impl ResultRow {
    fn failed(scenario: Scenario, seed: u64, sweep_value: Option<f64>, wall_time_s: f64) -> Self {
        ResultRow {
            scenario: scenario.as_str().into(),
            seed,
            sweep_value,
            status: "error".into(),
            feasible: false,
            violation: None,
            fidelity: None,
            e_fine: None,
            e_adjoint: None,
            e_toggling0: None,
            e_toggling4: None,
            e_universal0: None,
            max_du: None,
            max_ddu: None,
            wall_time_s,
        }
    }
}

pub struct CellOutput {
    pub row: ResultRow,
    pub solution: Option<Solution>,
    pub iterates: Option<Vec<IterateStats>>,
    pub error: Option<String>,
}

/// Builds, initializes, solves and cross-evaluates one `(seed, sweep value)`
/// cell. Failures are folded into the returned row.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    scenario: Scenario,
    params: &SpecParams,
    sweep: Option<SweepParam>,
    value: Option<f64>,
    seed: u64,
    opts: &SolverOptions,
    oversample: Option<usize>,
) -> CellOutput {
    let start = Instant::now();
    let attempt = || -> Result<(ResultRow, Solution, Option<Vec<IterateStats>>)> {
        let spec = build_spec(scenario, params, sweep, value)?;
        let problem = build(&spec)?;
        let x0 = problem.initialize(seed)?;
        let report = solve(&problem, &x0, opts);
        let traj = problem.trajectory(&report.x)?;
        let metrics = cross_evaluate(&spec, &traj, oversample)?;
        let iterates = if opts.record_iterates { Some(analyze_iterates(&problem, &report)?) } else { None };
        let row = ResultRow {
            scenario: scenario.as_str().into(),
            seed,
            sweep_value: value,
            status: report.status.as_str().into(),
            feasible: report.violation <= opts.tol_feas,
            violation: Some(report.violation),
            fidelity: Some(metrics.fidelity),
            e_fine: Some(metrics.e_fine),
            e_adjoint: Some(metrics.e_adjoint),
            e_toggling0: Some(metrics.e_toggling0),
            e_toggling4: Some(metrics.e_toggling4),
            e_universal0: Some(metrics.e_universal0),
            max_du: Some(metrics.max_du),
            max_ddu: Some(metrics.max_ddu),
            wall_time_s: 0.0,
        };
        let solution = Solution::new(scenario.as_str(), seed, value, &problem, &report, metrics)?;
        Ok((row, solution, iterates))
    };
    match attempt() {
        Ok((mut row, solution, iterates)) => {
            row.wall_time_s = start.elapsed().as_secs_f64();
            CellOutput {
                row,
                solution: Some(solution),
                iterates,
                error: None,
            }
        }
        Err(e) => CellOutput {
            row: ResultRow::failed(scenario, seed, value, start.elapsed().as_secs_f64()),
            solution: None,
            iterates: None,
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub build: String,
    pub version: String,
    pub scenario: Scenario,
    pub solver: SolverOptions,
    pub n_cells: usize,
    pub parallel: bool,
    pub errors: Vec<String>,
    pub config: ExperimentConfig,
}

pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub solutions: Vec<Option<Solution>>,
    pub results_path: PathBuf,
}

fn cell_name(scenario: Scenario, seed: u64, index: Option<usize>) -> String {
    match index {
        Some(i) => format!("{}_v{i}_seed{seed}", scenario.as_str()),
        None => format!("{}_seed{seed}", scenario.as_str()),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Runs every `(sweep value, seed)` cell of `cfg` and writes
///
/// * `results.csv`, one [`ResultRow`] per cell, sweep-value major;
/// * `solutions/<cell>.json` for every cell that produced controls;
/// * `iterates/<cell>.csv` when the solver records iterates;
/// * `run.json` with the build, solver options and cell errors.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out.join("solutions")).map_err(|e| io_err(out, e))?;
    if cfg.solver.record_iterates {
        std::fs::create_dir_all(out.join("iterates")).map_err(|e| io_err(out, e))?;
    }
    let values = cfg.cell_values();
    let cells: Vec<(Option<usize>, Option<f64>, u64)> = values
        .iter()
        .enumerate()
        .flat_map(|(i, v)| {
            let idx = cfg.sweep.as_ref().map(|_| i);
            cfg.seeds.iter().map(move |s| (idx, *v, *s))
        })
        .collect();
    let sweep = cfg.sweep.as_ref().map(|s| s.param);
    let outputs = parallel::map(cfg.execution, &cells, |&(_, v, seed)| {
        run_cell(cfg.scenario, &cfg.spec, sweep, v, seed, &cfg.solver, cfg.oversample)
    });

    let mut rows = Vec::with_capacity(outputs.len());
    let mut solutions = Vec::with_capacity(outputs.len());
    let mut errors = Vec::new();
    for ((idx, _, seed), cell) in cells.iter().zip(outputs) {
        let name = cell_name(cfg.scenario, *seed, *idx);
        if let Some(sol) = &cell.solution {
            sol.save(&out.join("solutions").join(format!("{name}.json")))?;
        }
        if let Some(it) = &cell.iterates {
            write_csv(&out.join("iterates").join(format!("{name}.csv")), it)?;
        }
        if let Some(e) = cell.error {
            errors.push(format!("{name}: {e}"));
        }
        rows.push(cell.row);
        solutions.push(cell.solution);
    }
    let results_path = out.join("results.csv");
    write_rows(&results_path, &rows)?;
    let meta = RunMetadata {
        build: env!("ROBUSTQC_GIT_DESCRIBE").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: cfg.scenario,
        solver: cfg.solver.clone(),
        n_cells: cells.len(),
        parallel: cfg.execution.is_parallel(),
        errors,
        config: cfg.clone(),
    };
    let meta_path = out.join("run.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(&meta_path, text).map_err(|e| io_err(&meta_path, e))?;
    Ok(RunOutput {
        rows,
        solutions,
        results_path,
    })
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_csv(path, rows)
}

/// Writes one CSV record per item, with a header from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| io_err(path, e))).collect()
}
