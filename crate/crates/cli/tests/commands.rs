use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ltlf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltlf")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn sample(dir: &Path) -> String {
    // three steps, two features
    write(dir, "tr.json", r#"{"dims":[3,2],"elems":[0,1,0.5,0.2,0.1,1]}"#)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn eval_prints_boolean_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let tr = sample(dir.path());
    let out = ltlf(&["eval", "-f", "F (f1 <= f0)", "--trace", &tr]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "{\"dims\":[],\"elems\":[true]}\n");
}

#[test]
fn eval_past_end_is_all_false() {
    let dir = tempfile::tempdir().unwrap();
    let batch = write(
        dir.path(),
        "b.json",
        r#"{"dims":[2,1,3],"elems":[0,0,0,0,0,0]}"#,
    );
    let out = ltlf(&["eval", "-f", "X (f0 <= f0)", "--trace", batch.to_str().unwrap(), "-t", "2"]);
    assert_eq!(stdout_json(&out)["elems"], serde_json::json!([false, false, false]));
}

#[test]
fn csv_traces_and_formula_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "tr.csv", "a,b\n0,1\n0.5,0.2\n0.1,1\n");
    let formula = write(dir.path(), "rho.ltl", "G (f0 <= f1)\n");
    let out = ltlf(&[
        "loss",
        "--formula-file",
        formula.to_str().unwrap(),
        "--trace",
        csv.to_str().unwrap(),
        "-g",
        "0",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["elems"], serde_json::json!([0.3]));
}

#[test]
fn naive_and_stable_agree_on_mild_input() {
    let dir = tempfile::tempdir().unwrap();
    let tr = sample(dir.path());
    let stable = ltlf(&["grad", "-f", "G (f0 <= f1)", "--trace", &tr, "-g", "0.5", "--stable"]);
    let naive = ltlf(&["grad", "-f", "G (f0 <= f1)", "--trace", &tr, "-g", "0.5", "--naive"]);
    let (a, b) = (stdout_json(&stable), stdout_json(&naive));
    for (x, y) in a["elems"].as_array().unwrap().iter().zip(b["elems"].as_array().unwrap()) {
        assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-12);
    }
    let both = ltlf(&["loss", "-f", "f0 <= f1", "--trace", &tr, "--stable", "--naive"]);
    assert!(!both.status.success());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let tr = sample(dir.path());
    let code = |args: &[&str]| ltlf(args).status.code().unwrap();
    assert_eq!(code(&["eval", "-f", "G (f0 <=", "--trace", &tr]), 2);
    assert_eq!(code(&["eval", "-f", "G (f0 <= speed)", "--trace", &tr]), 2);
    assert_eq!(code(&["eval", "-f", "G (f0 <= f7)", "--trace", &tr]), 3);
    assert_eq!(code(&["eval", "-f", "G (f0 <= f1)", "--trace", &tr, "-t", "4"]), 0);
    let bad = write(dir.path(), "bad.json", r#"{"dims":[2,2],"elems":[1]}"#);
    assert_eq!(code(&["loss", "-f", "f0 <= f1", "--trace", bad.to_str().unwrap()]), 3);
    let order1 = write(dir.path(), "o1.json", r#"{"dims":[2],"elems":[1,2]}"#);
    assert_eq!(code(&["loss", "-f", "f0 <= f0", "--trace", order1.to_str().unwrap()]), 3);
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&["eval", "-f", "f0 <= f0", "--trace", missing.to_str().unwrap()]), 3);
}

#[test]
fn gradcheck_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let tr = sample(dir.path());
    let out = ltlf(&[
        "gradcheck", "-f", "G (f0 <= f1) && F (f1 != f0)", "--trace", &tr, "-g", "0.05",
        "--sweep", "1e-8,1e-6,1e-2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["passed"], true);
    assert_eq!(report["checked"], 6);
    let failures: Vec<u64> = report["sweep"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["failures"].as_u64().unwrap())
        .collect();
    assert!(failures.windows(2).all(|w| w[0] >= w[1]), "{failures:?}");
}

#[test]
fn corrupted_gradient_fails_with_index() {
    let dir = tempfile::tempdir().unwrap();
    let tr = sample(dir.path());
    let out = ltlf(&["gradcheck", "-f", "G (f0 <= f1)", "--trace", &tr, "-g", "0.05", "--corrupt", "3"]);
    assert_eq!(out.status.code(), Some(5));
    let report = stdout_json(&out);
    assert_eq!(report["passed"], false);
    assert_eq!(report["argmax"], serde_json::json!([1, 1]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[1, 1]"));
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn avoid_experiment_defaults_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let run = ltlf(&["experiment", "avoid", "--seed", "3", "--out", out.to_str().unwrap()]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        let verdict = stdout_json(&run);
        let avoid = verdict["clauses"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["name"] == "avoid")
            .unwrap();
        assert_eq!(avoid["holds"], true);
    }
    let files = read_dir(&a);
    let names: Vec<&str> = files.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["config.json", "loss_history.csv", "trajectory.csv", "verdict.json"]);
    assert_eq!(files, read_dir(&b));
}

#[test]
fn double_loop_writes_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let run = ltlf(&[
        "experiment", "double_loop_conjoined", "--steps", "3", "--out", out.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let counts: Value = serde_json::from_slice(&std::fs::read(out.join("counts.json")).unwrap()).unwrap();
    assert_eq!(counts["rows"].as_array().unwrap().len(), 4);
    let slope = counts["nested_slope"].as_f64().unwrap();
    assert!((slope - 4.0).abs() <= 0.5, "{slope}");
    assert_eq!(ltlf(&["experiment", "orbit", "--out", "x"]).status.code(), Some(2));
}

#[test]
fn optimize_writes_artifacts_and_detects_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("opt");
    let run = ltlf(&[
        "optimize", "-c", "G (0.1 <= dist(p, (0.4, 0.4)))", "--steps", "20", "--samples", "12",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(stdout_json(&run)["step"], 20);
    let history = std::fs::read_to_string(out.join("loss_history.csv")).unwrap();
    assert_eq!(history.lines().count(), 22);
    let traj = out.join("trajectory.csv");
    let again = ltlf(&[
        "optimize", "-c", "G (speed <= 0.2)", "--init", traj.to_str().unwrap(), "--steps", "2",
        "--dynamical-weight", "1", "--out", dir.path().join("again").to_str().unwrap(),
    ]);
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));

    let blown = ltlf(&[
        "optimize", "-c", "G (accel <= 0) && G (x <= 0)", "--lr", "1e308", "--steps", "5",
        "--samples", "10", "--out", dir.path().join("blown").to_str().unwrap(),
    ]);
    assert_eq!(blown.status.code(), Some(4));
}

#[test]
fn selftest_agrees_with_oracle() {
    let out = ltlf(&["selftest", "--count", "50"]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["mismatches"], 0);
}
