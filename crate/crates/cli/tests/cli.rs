use std::path::Path;
use std::process::Command;

fn robustqc(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_robustqc")).args(args).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(out.status.success(), "{args:?}: {}{stdout}", String::from_utf8_lossy(&out.stderr));
    stdout
}

fn write_config(dir: &Path, name: &str, q: f64, extra: &str) -> String {
    let path = dir.join(name);
    let out = dir.join(name.trim_end_matches(".json"));
    let text = format!(
        r#"{{"scenario": "hadamard", "spec": {{"n_knots": 16, "dt": 2.0, "formulation": "indirect", "q": {q:?}}},
            "seeds": [0, 1], "solver": {{"tol_feas": 1e-9}}, "output_dir": {:?}{extra}}}"#,
        out.display()
    );
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn optimize_then_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.json", 1.0, "");
    let out = robustqc(&["--sequential", "optimize", &cfg]);
    assert!(out.contains("converged"), "{out}");
    let sol = dir.path().join("a/solutions/hadamard_seed0.json");
    let out = robustqc(&["metrics", sol.to_str().unwrap()]);
    let json: String = out.lines().take_while(|l| !l.starts_with("Pauli")).collect::<Vec<_>>().join("\n");
    let report: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(report["stored"], report["recomputed"]);
    assert!(dir.path().join("a/solutions/pauli_scan.csv").exists());
}

#[test]
fn sweep_writes_frontier_and_compare_pairs_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a.json", 1.0, r#", "sweep": {"param": "q", "values": [0.1, 1.0]}"#);
    robustqc(&["sweep", &a]);
    assert!(dir.path().join("a/frontier.csv").exists());

    let b = write_config(dir.path(), "b.json", 1.0, "");
    let c = write_config(dir.path(), "c.json", 10.0, "");
    let out = robustqc(&["compare", &b, &c]);
    let summary: serde_json::Value = serde_json::from_str(&out[out.find("\n{").unwrap()..]).unwrap();
    assert_eq!(summary["pairs"], 2);
    assert!(dir.path().join("b/comparison.csv").exists());
    assert!(dir.path().join("b/pauli_scan.csv").exists());
}

#[test]
fn wrong_subcommand_for_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.json", 1.0, "");
    let out = Command::new(env!("CARGO_BIN_EXE_robustqc")).args(["sweep", &cfg]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("optimize"));
}
