use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use robustqc::harness::{
    compare, load_config, read_rows, report_pareto, report_pauli_scan, run, write_csv, ExperimentConfig, Frontier,
    ResultRow, Solution,
};
use robustqc::parallel::Execution;

/// Robust quantum control experiments.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Run cells one at a time regardless of the config.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every seed of a config without a sweep.
    Optimize { config: PathBuf },
    /// Solve a sweep and report the robustness frontier.
    Sweep { config: PathBuf },
    /// Re-verify a saved solution and print its metrics and Pauli scan.
    Metrics { solution: PathBuf },
    /// Run two configs and compare them seed by seed.
    Compare {
        config_a: PathBuf,
        config_b: PathBuf,
        /// Read existing results.csv files instead of solving again.
        #[arg(long)]
        reuse: bool,
    },
}

fn load(path: &Path, sequential: bool) -> Result<ExperimentConfig> {
    let mut cfg = load_config(path)?;
    if sequential {
        cfg.execution = Execution::Sequential;
    }
    Ok(cfg)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3e}"))
}

fn print_rows(rows: &[ResultRow]) {
    println!("{:>6} {:>10} {:>10} {:>5} {:>10} {:>10} {:>10} {:>10} {:>8}", "seed", "sweep", "status", "feas", "fidelity", "E_V", "E_fine", "max_ddu", "time_s");
    for r in rows {
        println!(
            "{:>6} {:>10} {:>10} {:>5} {:>10} {:>10} {:>10} {:>10} {:>8.2}",
            r.seed,
            opt(r.sweep_value),
            r.status,
            r.feasible,
            r.fidelity.map_or_else(|| "-".into(), |v| format!("{v:.6}")),
            opt(r.e_adjoint),
            opt(r.e_fine),
            opt(r.max_ddu),
            r.wall_time_s
        );
    }
}

/// Lowest-susceptibility feasible solution of a run, if any.
fn best(rows: &[ResultRow], solutions: &[Option<Solution>]) -> Option<Solution> {
    rows.iter()
        .zip(solutions)
        .filter(|(r, s)| r.feasible && s.is_some())
        .filter_map(|(r, s)| Some((r.e_adjoint?, s.clone()?)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, s)| s)
}

fn pauli_scan(solution: &Solution, out: &Path) -> Result<()> {
    let scan = report_pauli_scan(solution)?;
    println!("Pauli scan (seed {}):", solution.seed);
    for p in &scan {
        println!("  {:<4} {:.4e}{}", p.label, p.e_adjoint, if p.targeted { "  *" } else { "" });
    }
    write_csv(&out.join("pauli_scan.csv"), &scan)?;
    Ok(())
}

fn optimize(path: &Path, sequential: bool) -> Result<()> {
    let cfg = load(path, sequential)?;
    if cfg.sweep.is_some() {
        bail!("{} defines a sweep; use `sweep`", path.display());
    }
    let out = run(&cfg)?;
    print_rows(&out.rows);
    println!("results: {}", out.results_path.display());
    Ok(())
}

fn sweep(path: &Path, sequential: bool) -> Result<()> {
    let cfg = load(path, sequential)?;
    if cfg.sweep.is_none() {
        bail!("{} has no sweep; use `optimize`", path.display());
    }
    let out = run(&cfg)?;
    print_rows(&out.rows);
    match report_pareto(&out.rows) {
        Frontier::Empty => println!("frontier: no feasible rows"),
        Frontier::Points(points) => {
            println!("{:>10} {:>6} {:>10} {:>10}", "sweep", "feas", "mean E_V", "min E_V");
            for p in &points {
                println!("{:>10} {:>3}/{:<2} {:>10.3e} {:>10.3e}", opt(p.sweep_value), p.n_feasible, p.n_rows, p.mean_e_adjoint, p.min_e_adjoint);
            }
            write_csv(&cfg.output_dir.join("frontier.csv"), &points)?;
        }
    }
    println!("results: {}", out.results_path.display());
    Ok(())
}

fn metrics(path: &Path) -> Result<()> {
    let sol = Solution::load(path)?;
    let verification = sol.verify()?;
    let recomputed = sol.recompute_metrics(None)?;
    let report = serde_json::json!({
        "seed": sol.seed,
        "n_knots": sol.n_knots,
        "dt": sol.dt,
        "verification": verification,
        "stored": sol.metrics,
        "recomputed": recomputed,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    let dir = path.parent().unwrap_or(Path::new("."));
    pauli_scan(&sol, dir)
}

fn side(path: &Path, sequential: bool, reuse: bool) -> Result<(ExperimentConfig, Vec<ResultRow>)> {
    let cfg = load(path, sequential)?;
    let results = cfg.output_dir.join("results.csv");
    if reuse && results.exists() {
        let rows = read_rows(&results)?;
        return Ok((cfg, rows));
    }
    let out = run(&cfg)?;
    if let Some(sol) = best(&out.rows, &out.solutions) {
        pauli_scan(&sol, &cfg.output_dir).with_context(|| format!("Pauli scan for {}", path.display()))?;
    }
    Ok((cfg, out.rows))
}

fn compare_configs(a: &Path, b: &Path, sequential: bool, reuse: bool) -> Result<()> {
    let (cfg_a, rows_a) = side(a, sequential, reuse)?;
    let (_, rows_b) = side(b, sequential, reuse)?;
    let (pairs, summary) = compare(&rows_a, &rows_b);
    write_csv(&cfg_a.output_dir.join("comparison.csv"), &pairs)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Optimize { config } => optimize(config, cli.sequential),
        Command::Sweep { config } => sweep(config, cli.sequential),
        Command::Metrics { solution } => metrics(solution),
        Command::Compare { config_a, config_b, reuse } => compare_configs(config_a, config_b, cli.sequential, *reuse),
    }
}
