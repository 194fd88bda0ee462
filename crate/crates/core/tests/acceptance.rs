//! Acceptance suite: one PASS/FAIL line per criterion with the measured
//! quantities and wall time. Runs the shipped configs into a scratch
//! directory; the last criterion re-verifies every converged solution
//! written by the others.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use robustqc::algebra::{Pauli, PauliString};
use robustqc::dynamics::{ControlSystem, ControlTrajectory, ErrorModel};
use robustqc::harness::{build_spec, load_config, report_pauli_scan, run, ResultRow, RunOutput, Scenario, Solution, SpecParams};
use robustqc::metrics::{susceptibility_adjoint, susceptibility_fine, susceptibility_toggling, universal_bound};
use robustqc::nlp::{check_problem, Problem, Status};
use robustqc::sample;
use robustqc::trajopt::{build_direct, build_indirect, Objective, ProblemSpec, TrajProblem};

/// Criteria whose measured outcome is a documented negative result (see
/// the README). They still print FAIL; they do not fail the test target.
const KNOWN_FAILURES: &[usize] = &[3, 6];

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn(&mut Suite) -> Outcome;

struct Suite {
    scratch: PathBuf,
    outputs: Vec<PathBuf>,
}

impl Suite {
    fn run_config(&mut self, name: &str) -> RunOutput {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut cfg = load_config(&root.join(format!("{name}.json"))).unwrap();
        cfg.output_dir = self.scratch.join(name);
        self.outputs.push(cfg.output_dir.clone());
        run(&cfg).unwrap()
    }
}

fn xyz() -> ControlSystem {
    ControlSystem::from_paulis(&["X", "Y", "Z"].map(|s| s.parse::<PauliString>().unwrap())).unwrap()
}

fn z_error() -> ErrorModel {
    ErrorModel::single("Z", Pauli::Z.matrix()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of `f` over feasible rows with the given sweep value.
fn median_at(rows: &[ResultRow], value: f64, f: impl Fn(&ResultRow) -> Option<f64>) -> f64 {
    median(rows.iter().filter(|r| r.feasible && r.sweep_value == Some(value)).filter_map(f).collect())
}

fn metric_equivalence(_: &mut Suite) -> Outcome {
    let sys = xyz();
    let mut rng = sample::rng(1);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let norm = 0.5 + 0.5 * i as f64 / 19.0;
        let traj = sample::trajectory(&mut rng, &sys, 16, 0.5, norm).unwrap();
        let fine = susceptibility_fine(&sys, &traj, &z_error(), 1 << 10).unwrap();
        let adj = susceptibility_adjoint(&sys, &traj, &z_error()).unwrap();
        worst = worst.max(rel(adj, fine));
    }
    Outcome { pass: worst < 1e-6, detail: format!("max |E_V - E_fine|/E_fine = {worst:.2e} over 20 trajectories") }
}

fn toggling_correction(s: &mut Suite) -> Outcome {
    let out = s.run_config("hadamard_knots");
    let mut gaps = Vec::new();
    let mut by_order = Vec::new();
    for (row, sol) in out.rows.iter().zip(&out.solutions) {
        let Some(sol) = sol.as_ref().filter(|_| row.feasible) else {
            return Outcome { pass: false, detail: format!("N = {} not feasible ({})", sol_n(row), row.status) };
        };
        let traj = sol.trajectory().unwrap();
        let (sys, err) = (&sol.spec.system, &sol.spec.error);
        let fine = susceptibility_fine(sys, &traj, err, 1 << 10).unwrap();
        let t0 = susceptibility_toggling(sys, &traj, err, 0).unwrap();
        gaps.push((sol.n_knots, (t0 - fine).abs()));
        if sol.n_knots == 32 {
            for j in [0, 2, 4, 8] {
                let t = susceptibility_toggling(sys, &traj, err, j).unwrap();
                by_order.push((j, (t - fine).abs(), rel(t, fine)));
            }
        }
    }
    let decreasing = gaps.len() == 4 && gaps.windows(2).all(|w| w[1].1 < w[0].1);
    let ordered = by_order.len() == 4 && by_order.windows(2).all(|w| w[1].1 <= w[0].1);
    let tight = by_order.last().is_some_and(|b| b.2 < 1e-2);
    let fmt = |v: &[(usize, f64)]| v.iter().map(|(k, g)| format!("{k}:{g:.2e}")).collect::<Vec<_>>().join(" ");
    let orders: Vec<(usize, f64)> = by_order.iter().map(|b| (b.0, b.1)).collect();
    Outcome {
        pass: decreasing && ordered && tight,
        detail: format!(
            "gap by N [{}]; gap by j at N=32 [{}]; rel gap j=8 {:.2e}",
            fmt(&gaps),
            fmt(&orders),
            by_order.last().map_or(f64::NAN, |b| b.2)
        ),
    }
}

fn sol_n(row: &ResultRow) -> String {
    row.sweep_value.map_or_else(|| "?".into(), |v| format!("{v}"))
}

fn saturation(s: &mut Suite) -> Outcome {
    let tog = s.run_config("hadamard_q_sweep_toggling").rows;
    let adj = s.run_config("hadamard_q_sweep_adjoint").rows;
    let qs = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];
    let t0: Vec<f64> = qs.iter().map(|&q| median_at(&tog, q, |r| r.e_toggling0)).collect();
    let fine: Vec<f64> = qs.iter().map(|&q| median_at(&tog, q, |r| r.e_fine)).collect();
    let t0_falls = t0.windows(2).all(|w| w[1] < w[0]);
    // plateau: ground truth falls less than twofold over the last decade of Q
    let plateau = fine[5] / fine[6] < 2.0;
    let gap = fine[6] / t0[6];
    let adj_worst = adj
        .iter()
        .filter_map(|r| Some(rel(r.e_adjoint?, r.e_fine?)))
        .fold(0.0f64, f64::max);
    let adj_rows = adj.iter().filter(|r| r.e_adjoint.is_some()).count();
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ");
    Outcome {
        pass: t0_falls && plateau && gap >= 10.0 && adj_rows == adj.len() && adj_worst < 1e-3,
        detail: format!(
            "(a) median E_T0 [{}] median E_fine [{}] E_fine drop over last decade {:.1}x, E_fine/E_T0 at Q=1e2 {gap:.1}; (b) max rel gap {adj_worst:.2e} over {adj_rows}/{} runs",
            list(&t0),
            list(&fine),
            fine[5] / fine[6],
            adj.len()
        ),
    }
}

fn universal(_: &mut Suite) -> Outcome {
    let sys = xyz();
    let mut rng = sample::rng(4);
    let (mut violations, mut min_slack, mut checks) = (0, f64::INFINITY, 0);
    for i in 0..20 {
        let traj = sample::trajectory(&mut rng, &sys, 16, 0.5, 0.3 + 0.035 * i as f64).unwrap();
        for _ in 0..100 {
            let e = sample::hermitian(&mut rng, 2);
            let (lhs, rhs) = universal_bound(&sys, &traj, &e, 0).unwrap();
            let slack = rhs - lhs;
            min_slack = min_slack.min(slack);
            violations += usize::from(slack < -1e-10);
            checks += 1;
        }
    }
    Outcome { pass: violations == 0, detail: format!("{violations} violations in {checks} checks, min slack {min_slack:.2e}") }
}

fn analytic_zero(_: &mut Suite) -> Outcome {
    let (n, dt) = (21, 0.5);
    let traj = ControlTrajectory::constant(dt, n, &[PI / ((n - 1) as f64 * dt), 0.0, 0.0]).unwrap();
    let fine = susceptibility_fine(&xyz(), &traj, &z_error(), 1 << 12).unwrap();
    let adj = susceptibility_adjoint(&xyz(), &traj, &z_error()).unwrap();
    Outcome { pass: fine < 1e-10 && adj < 1e-10, detail: format!("E_fine {fine:.2e}, E_V {adj:.2e}") }
}

fn constraint_studies(s: &mut Suite) -> Outcome {
    let (du, ddu) = (1.0 + 1e-6, 2.0 + 1e-6);
    let mut within = true;
    let mut peak = (0.0f64, 0.0f64);
    for name in ["hadamard_constrained_direct", "hadamard_constrained_indirect"] {
        for r in s.run_config(name).rows {
            let (a, b) = (r.max_du.unwrap_or(f64::INFINITY), r.max_ddu.unwrap_or(f64::INFINITY));
            within &= a <= du && b <= ddu;
            peak = (peak.0.max(a), peak.1.max(b));
        }
    }

    let free = s.run_config("hadamard_unconstrained_indirect");
    let dir = s.outputs.last().unwrap().join("iterates");
    let mut exceeded = 0;
    let mut free_peak = (0.0f64, 0.0f64);
    for entry in std::fs::read_dir(&dir).unwrap() {
        let mut rdr = csv::Reader::from_path(entry.unwrap().path()).unwrap();
        let mut over = false;
        for it in rdr.deserialize::<robustqc::trajopt::IterateStats>() {
            let it = it.unwrap();
            free_peak = (free_peak.0.max(it.max_du), free_peak.1.max(it.max_ddu));
            over |= it.max_du > 1.0 || it.max_ddu > 2.0;
        }
        exceeded += usize::from(over);
    }
    let seeds = free.rows.len();

    let direct = s.run_config("hadamard_fidelity_direct").rows;
    let indirect = s.run_config("hadamard_fidelity_indirect").rows;
    let feasible = |rows: &[ResultRow]| rows.iter().filter(|r| r.feasible).count();
    let med = |rows: &[ResultRow]| median(rows.iter().filter(|r| r.feasible).filter_map(|r| r.e_adjoint).collect());
    let (fd, fi) = (feasible(&direct), feasible(&indirect));
    let factor = med(&indirect) / med(&direct);
    let indirect_worse = fi < indirect.len() || factor >= 10.0;
    Outcome {
        pass: within && exceeded >= 1 && fd >= 8 && indirect_worse,
        detail: format!(
            "(a) constrained max du {:.4} ddu {:.4}; (b) unconstrained iterates over bound on {exceeded}/{seeds} seeds (peak du {:.3} ddu {:.3}); \
             (c) feasible direct {fd}/{} indirect {fi}/{}, median E_V indirect/direct {factor:.2}",
            peak.0,
            peak.1,
            free_peak.0,
            free_peak.1,
            direct.len(),
            indirect.len()
        ),
    }
}

fn iswap(s: &mut Suite) -> Outcome {
    let adj = s.run_config("iswap_adjoint");
    let uni = s.run_config("iswap_universal");
    let (pairs, summary) = robustqc::harness::compare(&adj.rows, &uni.rows);
    let scan_rows = |out: &RunOutput| {
        out.solutions
            .iter()
            .flatten()
            .next()
            .map_or(0, |sol: &Solution| report_pauli_scan(sol).map_or(0, |v| v.len()))
    };
    let (sa, su) = (scan_rows(&adj), scan_rows(&uni));
    let fa = adj.rows.iter().filter(|r| r.feasible).count();
    let fu = uni.rows.iter().filter(|r| r.feasible).count();
    Outcome {
        pass: summary.a_lower >= 12 && sa == 15 && su == 15,
        detail: format!(
            "adjoint lower on {}/{} pairs ({} both feasible; feasible adjoint {fa}, universal {fu}); median E_V ratio universal/adjoint {:.2}; Pauli scan rows {sa}/{su}",
            summary.a_lower,
            pairs.len(),
            summary.both_feasible,
            summary.median_ratio.unwrap_or(f64::NAN)
        ),
    }
}

const OBJECTIVES: [Objective; 6] = [
    Objective::None,
    Objective::Toggling(0),
    Objective::Toggling(3),
    Objective::Universal(0),
    Objective::Universal(2),
    Objective::Adjoint,
];

fn gradient_specs(objective: Objective) -> Vec<ProblemSpec> {
    let params = |n: usize| SpecParams {
        n_knots: Some(n),
        objective: Some(objective),
        fidelity_weight: Some(0.5),
        ..Default::default()
    };
    let mut hadamard = build_spec(Scenario::Hadamard, &params(6), None, None).unwrap();
    hadamard.bounds.du = Some(robustqc::trajopt::Cap::Uniform(1.0));
    let iswap = build_spec(Scenario::Iswap, &params(4), None, None).unwrap();
    vec![hadamard, iswap]
}

/// Worst relative error over the objective, equality and inequality parts
/// at ten random off-manifold points with random constraint weights.
fn gradient_errors(p: &TrajProblem, seed: u64) -> [f64; 3] {
    let mut worst = [0.0f64; 3];
    let x0 = p.initialize(seed).unwrap();
    for trial in 0..10u64 {
        let mut rng = sample::rng(seed * 100 + trial);
        let x: Vec<f64> = x0
            .iter()
            .zip(p.lower().iter().zip(p.upper()))
            .map(|(x, (l, u))| if l == u { *x } else { x + rng.gen_range(-0.3..0.3) })
            .collect();
        let w_eq: Vec<f64> = (0..p.n_eq()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w_in: Vec<f64> = (0..p.n_ineq()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e = check_problem(p, &x, &w_eq, &w_in);
        for k in 0..3 {
            worst[k] = worst[k].max(e[k]);
        }
    }
    worst
}

fn gradients(_: &mut Suite) -> Outcome {
    let mut worst = [0.0f64; 3];
    let mut problems = 0;
    for (i, obj) in OBJECTIVES.iter().enumerate() {
        for spec in gradient_specs(*obj) {
            for p in [build_direct(&spec).unwrap(), build_indirect(&spec).unwrap()] {
                let e = gradient_errors(&p, i as u64 + 1);
                for k in 0..3 {
                    worst[k] = worst[k].max(e[k]);
                }
                problems += 1;
            }
        }
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    Outcome {
        pass: max < 1e-5,
        detail: format!(
            "{problems} problems x 10 points: objective {:.1e}, equalities {:.1e}, inequalities {:.1e}",
            worst[0], worst[1], worst[2]
        ),
    }
}

fn feasibility_contract(s: &mut Suite) -> Outcome {
    let (mut checked, mut bad, mut worst) = (0, Vec::new(), 0.0f64);
    for out in &s.outputs {
        let Ok(entries) = std::fs::read_dir(out.join("solutions")) else { continue };
        for entry in entries {
            let path = entry.unwrap().path();
            let sol = Solution::load(&path).unwrap();
            if sol.solver.status != Status::Converged {
                continue;
            }
            let v = sol.verify().unwrap();
            worst = worst.max(v.violation).max(v.dynamics_residual).max(v.chain_residual).max(v.bound_excess);
            checked += 1;
            if !v.within(1e-6) {
                bad.push(path.file_name().unwrap().to_string_lossy().into_owned());
            }
        }
    }
    Outcome {
        pass: checked > 0 && bad.is_empty(),
        detail: format!("{checked} converged solutions re-verified, worst residual {worst:.1e}, {} outside 1e-6 {bad:?}", bad.len()),
    }
}

fn main() -> ExitCode {
    // Budgets in seconds; the last criterion is amortized over the others.
    let criteria: [(&str, Check, f64); 9] = [
        ("metric equivalence", metric_equivalence, 10.0),
        ("toggling correction", toggling_correction, 120.0),
        ("saturation effect", saturation, 1800.0),
        ("universal bound", universal, 30.0),
        ("analytic zero", analytic_zero, 1.0),
        ("constraint studies", constraint_studies, 1800.0),
        ("iSWAP targeted vs universal", iswap, 3600.0),
        ("gradient integrity", gradients, 60.0),
        ("solver feasibility contract", feasibility_contract, f64::INFINITY),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let scratch = tempfile::tempdir().unwrap();
    let mut suite = Suite { scratch: scratch.path().to_path_buf(), outputs: Vec::new() };
    let mut unexpected = Vec::new();
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = check(&mut suite);
        let secs = start.elapsed().as_secs_f64();
        let in_time = secs < *budget;
        let pass = outcome.pass && in_time;
        let tag = match (pass, KNOWN_FAILURES.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        let time = if budget.is_finite() { format!("{secs:.1} s / {budget:.0} s") } else { format!("{secs:.1} s") };
        println!("C{id} {tag}: {name}: {} [{time}]", outcome.detail);
        if !pass && !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
