use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peierls-lab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn validate(json: &str) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, json).unwrap();
    lab(&["validate", "--config", path.to_str().unwrap()])
}

#[test]
fn validate_accepts_a_good_config() {
    let o = validate(r#"{"experiment": "pc-certify", "L0": 12, "R": 1, "J": 1.0}"#);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "ok");
}

#[test]
fn validate_names_the_bad_field() {
    let o = validate(r#"{"experiment": "ed-ssb", "L0": 5}"#);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("L0"), "{}", stdout(&o));
    let o = validate(r#"{"experiment": "ed-ssb", "L0": 4, "eps": -0.1}"#);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("eps"), "{}", stdout(&o));
}

#[test]
fn bad_override_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["gibbs-bottleneck", "--L0", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("L0"));
    assert!(!dir.path().join("results.csv").exists());
}

#[test]
fn pc_certify_writes_passing_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["pc-certify", "--L0", "12", "--R", "1", "--J", "1.0", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().any(|l| l == "pass"));
    let certs = std::fs::read_to_string(dir.path().join("certificates.jsonl")).unwrap();
    let mut lines = certs.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert!(header["config_hash"].is_string());
    let mut n = 0;
    for l in lines {
        let c: serde_json::Value = serde_json::from_str(l).unwrap();
        assert_eq!(c["pass"], true);
        n += 1;
    }
    assert!(n > 0);
    for f in ["results.csv", "report.json", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn ed_ssb_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["ed-ssb", "--L0", "4", "--eps", "0.1", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["rows"][0]["ssb"]["verdict"], true);
}

fn run_in(dir: &Path, jobs: &str) {
    let o = lab(&["markov-steady", "--jobs", jobs, "--seed", "3", "--n_chains", "32", "--sweeps", "200", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_in(a.path(), "1");
    run_in(b.path(), "3");
    for f in ["results.csv", "report.json", "escape_0.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn global_flags_may_follow_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = lab(&["pc-certify", "--L0", "12", "--out", out, "--jobs", "1", "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 9);
    let o = lab(&["pc-certify", "--L0", "12", "--out", out, "--seed", "nine"]);
    assert_eq!(o.status.code(), Some(2));
}
