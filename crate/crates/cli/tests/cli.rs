use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fano-balance"));
    cmd.env_remove("FANO_BALANCE_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn fano-balance")
}

fn corpus_file(stem: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(format!("{stem}.json"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const P1_KINK: &str = r#"{"polytope": "P1", "k": 1, "pieces": [{"linear": ["0"], "const": "0"}, {"linear": ["1"], "const": "0"}]}"#;

#[test]
fn list_builtins_reports_volumes() {
    let out = run(&["list-builtins"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let volumes: Vec<(&str, &str)> = text
        .lines()
        .map(|l| {
            let words: Vec<&str> = l.split_whitespace().collect();
            (words[0], words[4])
        })
        .collect();
    assert_eq!(volumes, [("P1", "2"), ("P2", "9/2"), ("P1xP1", "4"), ("F1", "4")]);
}

#[test]
fn list_builtins_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.json");
    assert!(run(&["list-builtins", "--out", out.to_str().unwrap()]).status.success());
    let v = read_json(&out);
    assert_eq!(v[1]["name"], "P2");
    assert_eq!(v[1]["lattice_points"], 10);
    assert_eq!(v[3]["degree"], "8");
}

#[test]
fn p1_kink_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p1-kink.json", P1_KINK);
    let out = dir.path().join("inv.json");
    let status = run(&["invariants", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status;
    assert!(status.success());
    let v = read_json(&out);
    assert_eq!(v["df"], "1/4");
    assert_eq!(v["chow_k"], "1/12");
    assert_eq!(v["fut_k"], "1");
    assert_eq!(v["p_norm_leading"], "5/24");
    assert_eq!(v["rescaled_chow"][1], "1/10");
}

#[test]
fn shipped_corpus_file_loads() {
    let cfg = corpus_file("p1_kink_e1_k1");
    let out = run(&["invariants", "--config", cfg.to_str().unwrap(), "--m-max", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["df"], "1/4");
}

#[test]
fn missing_config_is_an_error() {
    let out = run(&["invariants", "--config", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("/definitely/not/here.json"), "{err}");
}

#[test]
fn missing_polytope_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"polytope": "nowhere.json", "k": 1, "pieces": [{"linear": ["1"], "const": "0"}]}"#,
    );
    let out = run(&["invariants", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"polytope": "P1", "k": 1, "pieces": [{"linear": ["x"], "const": "0"}]}"#);
    let out = run(&["invariants", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = run(&["balance", "--polytope", "P1"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
    assert!(!run(&["frobnicate"]).status.success());
}

#[test]
fn bad_thread_count_is_an_error() {
    let out = bin().env("FANO_BALANCE_THREADS", "zero").arg("list-builtins").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn balance_then_reuse_metric() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.json");
    let trace = dir.path().join("trace.json");
    let out = run(&["balance", "--polytope", "p1", "--k", "2", "--out", h.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = read_json(&trace);
    assert_eq!(t["converged"], true);
    assert!(t.get("wall_seconds").is_none());
    let residuals = t["residuals"].as_array().unwrap();
    assert!(residuals.last().unwrap().as_f64().unwrap() < 1e-9);

    // Starting from the balanced metric converges immediately.
    let again = run(&["balance", "--polytope", "P1", "--k", "2", "--h", h.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert!(again.status.success());
    assert!(read_json(&trace)["iterations"].as_u64().unwrap() <= 1);

    let cfg = write(dir.path(), "c.json", r#"{"polytope": "P1", "k": 2, "pieces": [{"linear": ["1"], "const": "0"}]}"#);
    let lb = run(&["lowerbound", "--config", cfg.to_str().unwrap(), "--h", h.to_str().unwrap()]);
    assert!(lb.status.success());
    let v: Value = serde_json::from_slice(&lb.stdout).unwrap();
    assert_eq!(v["df"], "0");
    assert_eq!(v["holds"], true);
}

#[test]
fn f1_nonconvergence_writes_trace_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let out = run(&["balance", "--polytope", "F1", "--k", "1", "--max-iter", "25", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let t = read_json(&trace);
    assert_eq!(t["converged"], false);
    assert_eq!(t["residuals"].as_array().unwrap().len(), 25);
}

#[test]
fn functionals_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.json", P1_KINK);
    let csv = dir.path().join("series.csv");
    let out = run(&["functionals", "--config", cfg.to_str().unwrap(), "--t-grid", "0:8:2", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,E,L,D,Ek,Zk,Dk,ding_derivative,residual");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][1], 0.0, "E vanishes at the base point");
    // D = L - E / (-K)^n with (-K)^1 = 2 on P^1.
    for r in &rows {
        assert!((r[3] - (r[2] - r[1] / 2.0)).abs() < 1e-9, "{r:?}");
    }
    assert!(run(&["functionals", "--config", cfg.to_str().unwrap(), "--t-grid", "4:0:1"]).status.code() == Some(1));
}

#[test]
fn slope_reports_kink_and_product() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let product = corpus_file("p1_linear_e1_k1");
    let o = run(&["slope", "--config", product.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    assert!(v["slope"]["q_est"].as_f64().unwrap().abs() <= 1e-4);
    assert_eq!(v["product"], true);

    let kink = corpus_file("p1_kink_e1_k1");
    let o = run(&["slope", "--config", kink.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let q = read_json(&out)["slope"]["q_est"].as_f64().unwrap();
    assert!(q > 0.0 && q < 0.05, "{q}");
}

fn verify(extra: &[&str], out: &Path) -> Output {
    let mut args = vec!["verify-all", "--quick", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn verify_all_report_is_deterministic_and_schema_valid() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let first = verify(&[], &a);
    let second = bin().env("FANO_BALANCE_THREADS", "1").args(["verify-all", "--quick", "--out", b.to_str().unwrap()]).output().unwrap();
    assert_eq!(first.status.code(), second.status.code());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let report = read_json(&a);
    let schema: Value = serde_json::from_str(include_str!("../schemas/verification-report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    assert!(validator.is_valid(&report));

    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 12);
    let mut names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), 12, "one check per criterion");
    let all = checks.iter().all(|c| c["pass"] == true);
    assert_eq!(report["all_pass"], all);
    assert_eq!(first.status.code(), Some(if all { 0 } else { 2 }));
    // Stderr carries one summary line per check.
    assert_eq!(String::from_utf8(first.stderr).unwrap().lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 12);
}

#[test]
fn corrupted_weight_sign_fails_df_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = verify(&["--corrupt-weight-sign", "--timings"], &out);
    assert_eq!(o.status.code(), Some(2));
    let report = read_json(&out);
    assert!(report["runtime_seconds"].as_f64().unwrap() > 0.0);
    let exact = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "exact-invariants").unwrap();
    assert_eq!(exact["pass"], false);
}
