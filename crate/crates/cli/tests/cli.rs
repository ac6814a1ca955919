use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fintopic"))
}

fn toy_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/toy/config.toml")
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn run_args(run_dir: &Path) -> Vec<String> {
    vec![
        "--config".into(),
        toy_config().display().to_string(),
        "--run-dir".into(),
        run_dir.display().to_string(),
    ]
}

#[test]
fn full_run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let stdout = ok(bin().arg("run").args(run_args(&run)).output().unwrap());
    assert!(stdout.lines().any(|l| l.starts_with("report\t")), "{stdout}");
    let csv = std::fs::read_to_string(run.join("report/metrics.csv")).unwrap();
    assert!(csv.starts_with("metric,ctfidf\n"), "{csv}");
    assert!(run.join("manifest.json").is_file());
}

#[test]
fn stage_subcommands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    for stage in ["ingest", "prep", "label"] {
        ok(bin().arg(stage).args(run_args(&run)).output().unwrap());
    }
    assert!(run.join("label/counts.json").is_file());
    // topics before cluster names the missing artifact
    let out = bin().arg("topics").args(run_args(&run)).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cluster/assignments.jsonl"), "{err}");
}

#[test]
fn strategy_flags_select_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let mut args = run_args(&run);
    args.extend(["--topic-model", "nmf", "--set", "thresholds.nmf_k=4"].map(String::from));
    ok(bin().arg("run").args(&args).output().unwrap());
    let csv = std::fs::read_to_string(run.join("report/metrics.csv")).unwrap();
    assert!(csv.starts_with("metric,nmf\n"), "{csv}");

    let mut args = run_args(&run);
    args.extend(["--clusterer", "kmeans"].map(String::from));
    let out = bin().arg("run").args(&args).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("hdbscan"));
}

#[test]
fn vectors_inspect() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/toy/vectors.ftsvec");
    let stdout = ok(bin().args(["vectors", "inspect"]).arg(&path).output().unwrap());
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "dim\t32");
    assert!(lines[1].starts_with("rows\t"));
    assert!(lines[2].starts_with("first_key\ttoy-"), "{stdout}");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ftsvec");
    std::fs::write(&bad, b"NOTVEC00").unwrap();
    assert!(!bin().args(["vectors", "inspect"]).arg(&bad).output().unwrap().status.success());
}

#[test]
fn loss_prints_value_and_gradient() {
    let stdout = ok(bin()
        .args(["loss", "--batch", r#"{"positives":[0.8],"negatives":[0.3]}"#, "--scale", "16", "--margin", "0.1"])
        .output()
        .unwrap());
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert!(v["loss"].as_f64().unwrap() > 0.0);
    assert!(v["grad"]["positives"][0].as_f64().unwrap() < 0.0);
    assert!(v["grad"]["negatives"][0].as_f64().unwrap() > 0.0);

    let out = bin().args(["loss", "--batch", r#"{"positives":[1.5],"negatives":[]}"#]).output().unwrap();
    assert!(!out.status.success());
}
