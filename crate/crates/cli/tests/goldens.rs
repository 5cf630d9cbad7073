//! `ltlf loss` and `ltlf grad` against stored outputs.
//!
//! The golden file was produced by the library and is shared with the FFI
//! crate's tests. Regenerate with
//! `LTLF_BLESS=1 cargo test -p ltlf-cli --test goldens -- --ignored`.

use std::path::PathBuf;
use std::process::Command;

use ltlf_core::corpus::{corpus, CorpusLimits};
use ltlf_core::{dloss, loss, Constraint, LossConfig, RealTensor, TraceBatch};
use serde_json::{json, Value};

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/goldens/loss_grad.json")
}

fn cases() -> Vec<Value> {
    let text = std::fs::read_to_string(golden_path()).expect("golden file");
    let v: Value = serde_json::from_str(&text).unwrap();
    v["cases"].as_array().unwrap().clone()
}

fn run(cmd: &str, case: &Value, dir: &tempfile::TempDir) -> Value {
    let trace = dir.path().join(format!("{}.json", case["name"].as_str().unwrap()));
    std::fs::write(&trace, case["trace"].to_string()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ltlf"))
        .arg(cmd)
        .args(["-f", case["formula"].as_str().unwrap()])
        .arg("--trace")
        .arg(&trace)
        .args(["-t", &case["t"].to_string()])
        .args(["-g", &case["gamma"].to_string()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn bits(v: &Value) -> (Vec<u64>, Vec<u64>) {
    let dims = v["dims"].as_array().unwrap().iter().map(|d| d.as_u64().unwrap()).collect();
    let elems = v["elems"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e.as_f64().unwrap().to_bits())
        .collect();
    (dims, elems)
}

fn check(cmd: &str, key: &str) {
    let dir = tempfile::tempdir().unwrap();
    let cases = cases();
    assert_eq!(cases.len(), 50);
    for case in &cases {
        let got = run(cmd, case, &dir);
        assert_eq!(bits(&got), bits(&case[key]), "{} {}", cmd, case["name"]);
    }
}

#[test]
fn loss_matches_goldens() {
    check("loss", "loss");
}

#[test]
fn grad_matches_goldens() {
    check("grad", "grad");
}

#[test]
fn named_goldens_have_expected_values() {
    let cases = cases();
    let find = |n: &str| cases.iter().find(|c| c["name"] == n).unwrap().clone();
    let atom = find("le_atom");
    assert!((atom["loss"]["elems"][0].as_f64().unwrap() - 0.3).abs() < 1e-15);
    let past = find("past_end");
    assert!(past["loss"]["elems"].as_array().unwrap().iter().all(|v| v == 1.0));
    assert!(past["grad"]["elems"].as_array().unwrap().iter().all(|v| v == 0.0));
    assert_eq!(find("eventually_hard")["loss"]["elems"][0], 0.25);
}

fn golden(name: &str, formula: &str, trace: &TraceBatch, t: usize, gamma: f64) -> Value {
    let c = Constraint::parse(formula).unwrap();
    let cfg = LossConfig::new(gamma);
    let l: RealTensor = loss(&c, trace, t, &cfg).unwrap();
    let g: RealTensor = dloss(&c, trace, t, &cfg).unwrap();
    json!({
        "name": name,
        "formula": formula,
        "t": t,
        "gamma": gamma,
        "trace": trace.tensor(),
        "loss": l,
        "grad": g,
    })
}

#[test]
#[ignore]
fn bless() {
    if std::env::var_os("LTLF_BLESS").is_none() {
        return;
    }
    let rows = |r: &[&[f64]]| TraceBatch::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap();
    let mut cases = vec![
        golden("le_atom", "f0 <= f1", &rows(&[&[0.5, 0.2]]), 0, 0.0),
        golden(
            "past_end",
            "G (f0 < f1)",
            &TraceBatch::new(RealTensor::zeros(vec![2, 2, 3])).unwrap(),
            2,
            0.1,
        ),
        golden(
            "eventually_hard",
            "F (f0 <= f1)",
            &rows(&[&[1.0, 0.25], &[0.5, 0.25], &[0.75, 0.25]]),
            0,
            0.0,
        ),
    ];
    let gammas = [0.5, 0.05, 0.005];
    for (k, inst) in corpus(2024, 47, &CorpusLimits::default()).iter().enumerate() {
        cases.push(golden(
            &format!("random_{k:02}"),
            &inst.formula.to_string(),
            &inst.trace,
            inst.t,
            gammas[k % 3],
        ));
    }
    let text = serde_json::to_string_pretty(&json!({ "cases": cases })).unwrap();
    std::fs::write(golden_path(), text + "\n").unwrap();
}
