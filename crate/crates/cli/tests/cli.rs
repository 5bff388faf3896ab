use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlab"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn manifest() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/manifests/bernoulli_family.json")
        .display()
        .to_string()
}

fn write_config(dir: &Path, learner: serde_json::Value, threshold: f64) -> PathBuf {
    let cfg = serde_json::json!({
        "name": "cli",
        "manifest": {"path": manifest()},
        "learner": learner,
        "notion": "ex",
        "truths": [6],
        "class": [6, 8, 9],
        "seeds": [0, 1],
        "horizon": 512,
        "depth": 6,
        "grid": [256, 512],
        "success_threshold": threshold
    });
    let path = dir.join("cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn frequency() -> serde_json::Value {
    serde_json::json!({"kind": "frequency", "family": [6, 8, 9]})
}

#[test]
fn sample_is_deterministic() {
    let m = manifest();
    let args = [
        "sample",
        "--manifest",
        &m,
        "--entry",
        "6",
        "--seeds",
        "1,2",
        "--len",
        "32",
    ];
    let a = mlab(&args);
    assert!(a.status.success());
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines
        .iter()
        .all(|l| l.split('\t').nth(1).unwrap().len() == 32));
    assert_eq!(text, stdout(&mlab(&args)));
}

#[test]
fn sample_of_a_real_prints_its_prefix() {
    let m = manifest();
    let o = mlab(&["sample", "--manifest", &m, "--entry", "0", "--len", "8"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0\t01100110");
}

#[test]
fn learn_and_transform_print_guesses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), frequency(), 0.5);
    let cfg = cfg.to_str().unwrap();
    let o = mlab(&["learn", cfg, "--seed", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("n=256\tguess="));
    assert!(text.contains("n=512\tguess=6"));
    let o = mlab(&["transform", cfg, "--len", "256"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l.starts_with("6\t")));
}

#[test]
fn bench_writes_reports_and_report_rerenders_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), frequency(), 0.5);
    let json = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let o = mlab(&[
        "bench",
        cfg.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("cli\tPASS"));
    let rendered = mlab(&["report", json.to_str().unwrap()]);
    assert!(rendered.status.success());
    assert_eq!(stdout(&rendered), std::fs::read_to_string(&csv).unwrap());
    assert!(stdout(&rendered).starts_with("seed,n,guess,stabilized,verdict\n"));
}

#[test]
fn missed_threshold_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        serde_json::json!({"kind": "constant", "index": 1}),
        1.0,
    );
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    v["manifest"] = serde_json::json!({"entries": [
        {"kind": "measure", "measure": {"kind": "bernoulli", "q": "1/10"}},
        {"kind": "measure", "measure": {"kind": "bernoulli", "q": "9/10"}}
    ]});
    v["truths"] = serde_json::json!([0]);
    v["class"] = serde_json::json!([0, 1]);
    std::fs::write(&cfg, v.to_string()).unwrap();
    let o = mlab(&["bench", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("cli\tFAIL"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        serde_json::json!({"kind": "frequency", "family": [6, 999]}),
        0.5,
    );
    let o = mlab(&["bench", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("learner.family[1]"), "{err}");
    let missing = mlab(&["bench", "/nonexistent/cfg.json"]);
    assert_eq!(missing.status.code(), Some(2));
}
