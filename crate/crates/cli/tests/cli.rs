use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gstat")).args(args).env("SOURCE_DATE_EPOCH", "0").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

/// Runs with `--json -` and returns the envelope.
fn report(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--json", "-"]);
    let out = gstat(&all);
    assert!(code(&out) <= 1, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

fn assert_valid(name: &str, doc: &Value) {
    let text = std::fs::read_to_string(schema_dir().join(format!("{name}.schema.json"))).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}

#[test]
fn axioms_exit_codes() {
    assert_eq!(code(&gstat(&["axioms", "--order", "3", "--trials", "2000"])), 0);
    assert_eq!(code(&gstat(&["axioms", "--metric", "first-pair", "--trials", "200"])), 1);
    assert_eq!(code(&gstat(&["axioms", "--no-such-flag"])), 2);
    assert_eq!(code(&gstat(&["axioms", "--metric", "max-pairwise", "--base", "abs", "--dim", "2"])), 2);
}

#[test]
fn analyze_square_spike_and_constant() {
    let r = report(&["analyze", "--generator", "square-spike:n=10000", "--limit", "0", "--eps", "0.5"]);
    assert_valid("analyze", &r);
    let p = &r["payload"];
    assert_eq!(p["overall"], true);
    assert_eq!(p["classical_verdict"], false);
    let last = p["per_eps"][0]["trace"]["estimates"].as_array().unwrap().last().unwrap().clone();
    assert_eq!(last["count"], 49_000_050);
    assert_eq!(r["timestamp"], "1970-01-01T00:00:00Z");

    let r = report(&["analyze", "--generator", "constant:value=2,n=500"]);
    assert_eq!(r["payload"]["overall"], true);
    assert_eq!(r["payload"]["classical_verdict"], true);
    assert_eq!(r["payload"]["limit_source"], "mode");
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(code(&gstat(&["analyze", "--generator", "square-spike:n=100", "--ngrid", "10:200:log"])), 2);
    assert_eq!(code(&gstat(&["analyze", "--generator", "nonsense:n=3"])), 2);
    assert_eq!(code(&gstat(&["analyze", "--input", "/nonexistent/seq.txt"])), 2);
    assert_eq!(code(&gstat(&["analyze", "--generator", "square-spike:n=100", "--eps", "0"])), 2);
    assert_eq!(code(&gstat(&["density", "--set", "primes", "-n", "10"])), 2);
}

#[test]
fn sequence_files_are_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seq.txt");
    let text: String = (1..=400).map(|k| format!("{},{}\n", 1.0 / k as f64, -1.0 / k as f64)).collect();
    std::fs::write(&path, text).unwrap();
    let r = report(&["analyze", "--input", path.to_str().unwrap(), "--limit", "0,0", "--eps", "0.1"]);
    assert_eq!(r["payload"]["metric"], "max-pairwise/euclid");
    assert_eq!(r["payload"]["per_eps"][0]["classical"]["holds"], true);
}

#[test]
fn cauchy_density_extract_falsify_validate() {
    let r = report(&["cauchy", "--generator", "square-spike:n=10000", "--eps", "0.5"]);
    assert_valid("cauchy", &r);
    assert_eq!(r["payload"]["overall"], true);

    let r = report(&["density", "--set", "squares", "-n", "10000", "--ngrid", "100:10000:log2"]);
    assert_valid("density", &r);
    assert_eq!(r["payload"]["estimate"]["count"], 4950);
    assert_eq!(r["payload"]["verdict"]["kind"], "tends-to-zero");

    let r = report(&["density", "--set", "odds", "-n", "200", "--estimator", "exact"]);
    assert_eq!(r["payload"]["estimate"]["count"], 4950);

    let dir = tempfile::tempdir().unwrap();
    let y = dir.path().join("y.txt");
    let idx = dir.path().join("a.txt");
    let r = report(&[
        "extract",
        "--generator",
        "square-spike:n=4096",
        "--limit",
        "0",
        "--out-sequence",
        y.to_str().unwrap(),
        "--out-indices",
        idx.to_str().unwrap(),
    ]);
    assert_valid("extract", &r);
    assert_eq!(r["payload"]["mismatch_set"].as_array().unwrap().len(), 64);
    assert_eq!(r["payload"]["modified_tail_test"]["holds"], true);
    assert_eq!(std::fs::read_to_string(&y).unwrap().lines().filter(|l| *l == "0").count(), 4096);
    assert_eq!(std::fs::read_to_string(&idx).unwrap().lines().count(), 4096 - 64);

    let r = report(&["falsify", "--theorem", "T2.2", "--trials", "5", "--len", "1024"]);
    assert_valid("falsify", &r);
    assert_eq!(r["payload"]["suspects"].as_array().unwrap().len(), 0);

    let r = report(&["axioms", "--metric", "first-pair", "--trials", "50"]);
    assert_valid("axioms", &r);
    assert_eq!(r["payload"]["passed"], false);
}

#[test]
fn trace_plot_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let (csv, svg) = (dir.path().join("t.csv"), dir.path().join("t.svg"));
    let sq = report(&["density", "--set", "squares", "-n", "1000", "--ngrid", "100,400,1000"]);
    std::fs::write(&trace, sq.to_string()).unwrap();
    let args = [
        "trace-plot",
        "--trace",
        trace.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ];
    assert_eq!(code(&gstat(&args)), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("n,value,ci_halfwidth\n100,"));
    let first = std::fs::read(&svg).unwrap();
    assert_eq!(code(&gstat(&args)), 0);
    assert_eq!(std::fs::read(&svg).unwrap(), first);

    std::fs::write(&trace, r#"{"grid": [], "estimates": []}"#).unwrap();
    assert_eq!(code(&gstat(&args)), 2);
    std::fs::write(&trace, "not json").unwrap();
    assert_eq!(code(&gstat(&args)), 2);
}
