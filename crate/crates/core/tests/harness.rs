use std::path::Path;

use robustqc::harness::{
    compare, load_config, parse_config, read_rows, report_pareto, report_pauli_scan, run, write_rows, Frontier, Solution,
};

fn config(dir: &Path, objective: &str, formulation: &str, seeds: &str) -> String {
    format!(
        r#"{{
            "scenario": "hadamard",
            "spec": {{"n_knots": 16, "dt": 2.0, "objective": {objective}, "formulation": "{formulation}"}},
            "seeds": {seeds},
            "solver": {{"tol_feas": 1e-9}},
            "output_dir": {:?}
        }}"#,
        dir.display()
    )
}

const ADJOINT: &str = r#"{"kind": "adjoint"}"#;

#[test]
fn single_seed_run_writes_one_row_and_a_verifiable_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&config(dir.path(), ADJOINT, "direct", "[3]")).unwrap();
    let out = run(&cfg).unwrap();
    assert_eq!(out.rows.len(), 1);
    let row = &out.rows[0];
    assert_eq!((row.seed, row.status.as_str(), row.feasible), (3, "converged", true));
    assert!(row.fidelity.unwrap() >= 0.9999 - 1e-9);
    assert!(dir.path().join("run.json").exists());

    assert_eq!(read_rows(&out.results_path).unwrap(), out.rows);
    let sol = Solution::load(&dir.path().join("solutions/hadamard_seed3.json")).unwrap();
    assert_eq!(Some(&sol), out.solutions[0].as_ref());
    let v = sol.verify().unwrap();
    assert!(v.within(1e-6), "{v:?}");
    assert!(v.state_fidelity >= 0.9999 - 1e-6);
    let m = sol.recompute_metrics(None).unwrap();
    assert_eq!(m, sol.metrics);
}

#[test]
fn runs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run(&parse_config(&config(a.path(), ADJOINT, "indirect", "[0, 1]")).unwrap()).unwrap();
    let rb = run(&parse_config(&config(b.path(), ADJOINT, "indirect", "[0, 1]")).unwrap()).unwrap();
    for (x, y) in ra.rows.iter().zip(&rb.rows) {
        let (mut x, mut y) = (x.clone(), y.clone());
        x.wall_time_s = 0.0;
        y.wall_time_s = 0.0;
        assert_eq!(x, y);
    }
    let ua: Vec<_> = ra.solutions.iter().map(|s| s.as_ref().unwrap().u.clone()).collect();
    let ub: Vec<_> = rb.solutions.iter().map(|s| s.as_ref().unwrap().u.clone()).collect();
    assert_eq!(ua, ub);
}

#[test]
fn csv_round_trip_keeps_missing_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&config(dir.path(), ADJOINT, "indirect", "[0]")).unwrap();
    let mut rows = run(&cfg).unwrap().rows;
    let mut failed = rows[0].clone();
    failed.status = "error".into();
    failed.e_fine = None;
    failed.sweep_value = None;
    rows.push(failed);
    let path = dir.path().join("copy.csv");
    write_rows(&path, &rows).unwrap();
    assert_eq!(read_rows(&path).unwrap(), rows);
}

#[test]
fn sweep_rows_feed_the_frontier_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{
            "scenario": "hadamard",
            "spec": {{"n_knots": 16, "dt": 2.0, "formulation": "indirect"}},
            "sweep": {{"param": "q", "values": [0.01, 1.0]}},
            "seeds": [0, 1],
            "output_dir": {:?}
        }}"#,
        dir.path().display()
    );
    let out = run(&parse_config(&text).unwrap()).unwrap();
    assert_eq!(out.rows.len(), 4);
    assert!(dir.path().join("solutions/hadamard_v1_seed0.json").exists());
    let Frontier::Points(points) = report_pareto(&out.rows) else {
        panic!("no feasible rows");
    };
    assert_eq!(points.len(), 2);
    assert!(points[1].mean_e_adjoint < points[0].mean_e_adjoint);

    let (pairs, summary) = compare(&out.rows, &out.rows);
    assert_eq!((pairs.len(), summary.a_lower, summary.b_lower), (4, 0, 0));
    assert_eq!(summary.median_ratio, Some(1.0));
}

#[test]
fn pauli_scan_of_idle_controls_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&config(dir.path(), ADJOINT, "indirect", "[0]")).unwrap();
    let mut sol = run(&cfg).unwrap().solutions.remove(0).unwrap();
    let scan = report_pauli_scan(&sol).unwrap();
    assert_eq!(scan.len(), 3);
    assert_eq!(scan.iter().filter(|r| r.targeted).map(|r| r.label.as_str()).collect::<Vec<_>>(), ["Z"]);

    // with U(t) = I every Pauli string integrates to t_f·P
    for rows in [&mut sol.u, &mut sol.du, &mut sol.ddu] {
        rows.iter_mut().flatten().for_each(|v| *v = 0.0);
    }
    for r in report_pauli_scan(&sol).unwrap() {
        assert!((r.e_adjoint - 1.0).abs() < 1e-12, "{r:?}");
    }
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n > 0);
}

#[test]
fn config_errors_name_the_problem() {
    let err = load_config(Path::new("/nonexistent/config.json")).unwrap_err().to_string();
    assert!(err.contains("/nonexistent/config.json"), "{err}");
    let err = parse_config(r#"{"scenario": "hadamard", "seeds": [0], "output_dir": "o", "sweep": {"param": "n_knots", "values": [1.5]}}"#)
        .unwrap_err()
        .to_string();
    assert!(err.contains("sweep.values[0]"), "{err}");
    let err = parse_config(r#"{"scenario": "toffoli", "seeds": [0], "output_dir": "o"}"#).unwrap_err().to_string();
    assert!(err.contains("scenario"), "{err}");
}
