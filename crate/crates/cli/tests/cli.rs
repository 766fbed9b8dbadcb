use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn icpot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icpot"))
        .args(args)
        .env_remove("ICPOT_SEED")
        .output()
        .expect("binary runs")
}

fn problems() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    assert!(!files.is_empty());
    files
}

fn separation() -> PathBuf {
    problems()
        .into_iter()
        .find(|p| p.file_stem().unwrap() == "separation")
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_shipped_problem_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for problem in problems() {
        let sol = dir.path().join("sol.json");
        let out = icpot(&["solve", path_str(&problem), "-o", path_str(&sol)]);
        assert!(out.status.success(), "{}", problem.display());
        let verdict = json(&icpot(&["verify", path_str(&problem), path_str(&sol)]));
        assert_eq!(verdict["pass"], true, "{}: {verdict}", problem.display());
        assert_eq!(verdict["duals_source"], "file");
    }
}

#[test]
fn separation_objective_and_plan() {
    let sol = json(&icpot(&["solve", path_str(&separation())]));
    assert!((sol["objective"].as_f64().unwrap() - 0.3).abs() < 1e-12);
    assert_eq!(sol["plan"], serde_json::json!([[0, 0, 1.0]]));
    assert_eq!(sol["u"], serde_json::json!([0.0, 1.0]));
    assert_eq!(sol["v"], serde_json::json!([0.0]));
}

#[test]
fn modes_and_oracle_agree() {
    for problem in problems() {
        let p = path_str(&problem);
        let full = json(&icpot(&["solve", p, "--mode", "full"]))["objective"]
            .as_f64()
            .unwrap();
        let sparse = json(&icpot(&["solve", p, "--mode", "sparse"]))["objective"]
            .as_f64()
            .unwrap();
        let oracle = json(&icpot(&["solve", p, "--oracle"]));
        assert!((full - sparse).abs() <= 1e-9 * (1.0 + full.abs()));
        assert!((oracle["objective"].as_f64().unwrap() - full).abs() <= 1e-8 * (1.0 + full.abs()));
        assert!(oracle.get("f").is_none());
    }
}

#[test]
fn oracle_solution_verifies_against_solver_duals() {
    let dir = tempfile::tempdir().unwrap();
    for problem in problems() {
        let sol = dir.path().join("oracle.json");
        icpot(&["solve", path_str(&problem), "--oracle", "-o", path_str(&sol)]);
        let verdict = json(&icpot(&["verify", path_str(&problem), path_str(&sol)]));
        assert_eq!(verdict["pass"], true, "{}: {verdict}", problem.display());
        assert_eq!(verdict["duals_source"], "solver");
    }
}

#[test]
fn tampered_plan_reports_slackness_failure() {
    let dir = tempfile::tempdir().unwrap();
    let problem = separation();
    let mut sol = json(&icpot(&["solve", path_str(&problem)]));
    // Route the transported unit through the other source; still feasible,
    // but the rejected source now carries a positive unmatched cost.
    sol["plan"] = serde_json::json!([[1, 0, 1.0]]);
    sol["u"] = serde_json::json!([1.0, 0.0]);
    sol["objective"] = serde_json::json!(1.3);
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, sol.to_string()).unwrap();
    let verdict = json(&icpot(&["verify", path_str(&problem), path_str(&tampered)]));
    assert_eq!(verdict["pass"], false);
    assert_eq!(verdict["certificate"]["primal"]["max_row_residual"], 0.0);
    let failures = verdict["failures"].as_array().unwrap();
    assert!(failures
        .iter()
        .any(|f| f.as_str().unwrap().contains("complementary slackness")));
}

#[test]
fn reduce_emits_balanced_form() {
    let aug = json(&icpot(&["reduce", path_str(&separation())]));
    assert_eq!(aug["bar_mu"], serde_json::json!([1.0, 1.0, 1.0]));
    assert_eq!(aug["bar_nu"], serde_json::json!([1.0, 2.0]));
    assert_eq!(aug["bar_cost"].as_array().unwrap().len(), 3);
}

#[test]
fn sinkhorn_reports_marginals() {
    let out = json(&icpot(&[
        "sinkhorn-augmented",
        path_str(&separation()),
        "--epsilon",
        "0.5",
    ]));
    let coupling = out["coupling"].as_array().unwrap();
    let total: f64 = coupling
        .iter()
        .flat_map(|r| r.as_array().unwrap())
        .map(|x| x.as_f64().unwrap())
        .sum();
    assert!((total - 3.0).abs() < 1e-6);
    assert!(out["residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn exit_codes_distinguish_failures() {
    assert_eq!(icpot(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(icpot(&["solve", "/nonexistent.json"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"mu": [1.0], "nu": [-1.0], "cost": [[0.0]], "c_s": [0.0], "c_t": [0.0]}"#)
        .unwrap();
    let out = icpot(&["solve", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("negative mass at target 0"));
    assert_eq!(
        icpot(&["sinkhorn-augmented", path_str(&separation()), "--epsilon=-1"]).status.code(),
        Some(3)
    );
}

#[test]
fn pu_bench_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = icpot(&["bench", "pu", "--seeds", "1", "--seed", "7", "--out", path_str(out)]);
        assert!(o.status.success());
    }
    let csv_a = std::fs::read_to_string(a.join("pu.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read_to_string(b.join("pu.csv")).unwrap());
    let mut lines = csv_a.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,regime,policy,f1,accuracy,transported_mass"
    );
    assert_eq!(lines.count(), 6);
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("pu_summary.json")).unwrap()).unwrap();
    assert!(summary["heterogeneous"]["icpot_aligned"].as_f64().is_some());
}

#[test]
fn seed_comes_from_environment() {
    let run = |env: Option<&str>, args: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_icpot"));
        cmd.args(args).env_remove("ICPOT_SEED");
        if let Some(s) = env {
            cmd.env("ICPOT_SEED", s);
        }
        cmd.output().unwrap().stdout
    };
    let from_env = run(Some("3"), &["bench", "pu", "--seeds", "1"]);
    let from_flag = run(None, &["bench", "pu", "--seeds", "1", "--seed", "3"]);
    assert_eq!(from_env, from_flag);
    assert!(String::from_utf8_lossy(&from_env).lines().nth(1).unwrap().starts_with("3,"));
}

#[test]
fn geo_bench_writes_table_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = icpot(&[
        "bench", "geo", "--cases", "1", "--sweep", "--save-cases", "--out",
        path_str(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("geo.csv")).unwrap();
    let methods: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(methods, ["icpot", "partial_w_low", "partial_w_high"]);
    let curve = std::fs::read_to_string(dir.path().join("geo_sweep.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 16 + 1);
    assert!(dir.path().join("geo_case_0.json").exists());
    assert!(dir.path().join("geo_summary.json").exists());
}
