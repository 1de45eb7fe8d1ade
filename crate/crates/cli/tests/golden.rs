//! Golden reports for the reference problems, plus the exit-code contract.
//!
//! Set `UPDATE_GOLDEN=1` to rewrite the files under `tests/golden`.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn fixtures() -> PathBuf {
    manifest_dir().join("tests").join("fixtures")
}

fn golden_dir() -> PathBuf {
    manifest_dir().join("tests").join("golden")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgdare"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_in(&fixtures(), args)
}

fn updating() -> bool {
    std::env::var_os("UPDATE_GOLDEN").is_some_and(|v| v == "1")
}

fn compare_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if updating() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}; run with UPDATE_GOLDEN=1 to create it", path.display()));
    assert_eq!(actual, expected, "report differs from {}", path.display());
}

fn numbers(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(n) => out.push(n.as_f64().unwrap()),
        Value::Array(items) => items.iter().for_each(|i| numbers(i, out)),
        Value::Object(map) => map.values().for_each(|i| numbers(i, out)),
        _ => {}
    }
}

fn assert_round_trips(text: &str) {
    let first: Value = serde_json::from_str(text).unwrap();
    let again: Value = serde_json::from_str(&serde_json::to_string(&first).unwrap()).unwrap();
    assert_eq!(first, again);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    numbers(&first, &mut a);
    numbers(&again, &mut b);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

/// (fixture, command, extra flags)
const CASES: &[(&str, &str, &[&str])] = &[
    ("free_subspace", "solve", &[]),
    ("free_subspace", "verify", &[]),
    ("free_subspace", "spectral", &["--samples", "16"]),
    ("free_subspace", "stabilize", &["--poles", "0"]),
    ("gdare_only", "solve", &[]),
    ("gdare_only", "verify", &[]),
    ("gdare_only", "spectral", &[]),
    ("stein_family", "stein", &["--seed", "0"]),
];

#[test]
fn reports_match_golden_files() {
    for (fixture, command, extra) in CASES {
        let file = format!("{fixture}.json");
        let mut args = vec![*command, file.as_str()];
        args.extend_from_slice(extra);
        let out = run(&args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{command} {file}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = String::from_utf8(out.stdout).unwrap();
        let value: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["schema_version"], "1");
        assert_eq!(value["command"], *command);
        assert!(
            value["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true),
            "{command} {file}"
        );
        assert_round_trips(&text);
        compare_golden(&format!("{fixture}.{command}.json"), &text);
    }
}

#[test]
fn indefinite_popov_matrix_is_rejected() {
    let out = run(&["solve", "indefinite_popov.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("Popov matrix not positive semidefinite"), "{stderr}");
    compare_golden("indefinite_popov.solve.stderr", &stderr);
}

#[test]
fn repeated_runs_are_byte_identical() {
    for (fixture, command, extra) in CASES {
        let file = format!("{fixture}.json");
        let mut args = vec![*command, file.as_str(), "--seed", "7"];
        args.extend_from_slice(extra);
        let first = run(&args);
        let second = run(&args);
        assert_eq!(first.stdout, second.stdout, "{command} {file}");
        assert_eq!(first.status.code(), second.status.code());
    }
}

#[test]
fn out_flag_writes_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.json");
    let target_str = target.to_str().unwrap();
    let printed = run(&["stabilize", "free_subspace.json", "--poles", "0"]);
    let written = run(&["stabilize", "free_subspace.json", "--poles", "0", "--out", target_str]);
    assert_eq!(written.status.code(), Some(0));
    assert!(written.stdout.is_empty());
    assert_eq!(std::fs::read(&target).unwrap(), printed.stdout);
}

fn scratch_problem(body: &str) -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.json"), body).unwrap();
    (dir, "p.json".to_string())
}

#[test]
fn exit_codes_follow_the_contract() {
    // 2: no finite solution, the iteration blows up
    let (dir, file) =
        scratch_problem(r#"{"n": 1, "m": 1, "A": [[2]], "B": [[0]], "Q": [[1]], "R": [[1]], "S": [[0]]}"#);
    let out = run_in(dir.path(), &["solve", &file]);
    assert_eq!(out.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["solve"]["status"], "Diverged");

    // 3: iteration limit
    let out = run(&["solve", "free_subspace.json", "--max-iter", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["solve"]["status"], "MaxIterReached");

    // 4: module-level rejection
    let out = run(&["stabilize", "free_subspace.json", "--poles", "0,0.5"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("expected 1 desired poles, got 2"));

    // 1: missing candidates, bad syntax, bad shape, bad flag value
    let out = run(&["verify", "stein_family.json"]);
    assert_eq!(out.status.code(), Some(1));
    let (dir, file) = scratch_problem("{\n  \"n\": 1,\n  \"A\": [[1]],\n  \"Q\": [[1]]\n  \"m\": 1\n}\n");
    let out = run_in(dir.path(), &["solve", &file]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
    let (dir, file) = scratch_problem(
        r#"{"n": 2, "m": 1, "A": [[1, 0]], "B": [[1], [0]], "Q": [[1, 0], [0, 1]], "R": [[1]], "S": [[0], [0]]}"#,
    );
    let out = run_in(dir.path(), &["solve", &file]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("field `A`"));
    let out = run(&["stabilize", "free_subspace.json", "--poles", "zero"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["solve", "free_subspace.json", "--tol", "-1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["solve", "no_such_file.json"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["frobnicate", "free_subspace.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn trivial_dynamics_give_the_state_weight() {
    let (dir, file) = scratch_problem(
        r#"{"n": 2, "m": 1, "A": [[0, 0], [0, 0]], "B": [[1], [0]], "Q": [[2, 1], [1, 3]], "R": [[1]], "S": [[0], [0]]}"#,
    );
    let out = run_in(dir.path(), &["solve", &file]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let x = &report["solve"]["x_bar"];
    let expect = [[2.0, 1.0], [1.0, 3.0]];
    for (i, row) in expect.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!((x[i][j].as_f64().unwrap() - v).abs() <= 1e-12);
        }
    }
}

#[test]
fn verify_flags_match_the_reference_verdicts() {
    let out = run(&["verify", "free_subspace.json"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let c = &report["candidates"];
    assert_eq!(c[0]["classification"], "CGDARE");
    for flag in [
        "kernel_condition",
        "kernel_identity",
        "ker_x_output_nulling",
        "k_x_is_friend",
        "drlmi_holds",
    ] {
        assert_eq!(c[0][flag], true, "{flag}");
    }
    assert_eq!(c[1]["classification"], "DRLMI_ONLY");

    let out = run(&["verify", "gdare_only.json"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let c = &report["candidates"][0];
    assert_eq!(c["classification"], "GDARE_ONLY");
    assert_eq!(c["kernel_identity"], false);
    assert_eq!(c["ker_r_x_dim"], 1);
    assert_eq!(c["ker_xb_and_r_dim"], 0);
}
