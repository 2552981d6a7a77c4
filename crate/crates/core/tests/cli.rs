use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_realshare"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn boston() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/boston_housing.csv").display().to_string()
}

#[test]
fn cost_reports_closed_forms() {
    let o = run(&["cost", "--dim", "14", "--method", "inverse", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["total_openings"], 6090);
    let o = run(&["cost", "--dim", "14", "--method", "gauss"]);
    assert!(stdout(&o).contains("total openings: 2541"));
}

#[test]
fn leak_reproduces_the_reference_scenario() {
    let o = run(&[
        "leak",
        "--dim",
        "14",
        "--method",
        "inverse",
        "--alphas",
        "0.1,0.3,0.5,0.7,0.9",
        "--adversary",
        "2,3,4",
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["openings"], 6090);
    assert!((v["leakage_nats"].as_f64().unwrap() - 0.6243).abs() < 5e-4);
    let o = run(&["leak", "--openings", "2541", "--sigma-r2", "1e6", "--sigma-beta2", "1e7"]);
    assert!(stdout(&o).contains("0.005"));
}

#[test]
fn regress_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "regress".to_string(),
            "--data".into(),
            boston(),
            "--lambda".into(),
            "1".into(),
            "--lambda".into(),
            "1000".into(),
            "--repeats".into(),
            "2".into(),
            "--seed".into(),
            "5".into(),
            "--out".into(),
            dir.path().join(out).display().to_string(),
        ]
    };
    for out in ["a.json", "b.json"] {
        assert!(bin().args(args(out)).status().unwrap().success());
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let cell = &v["methods"]["secure-gauss"]["lambda=1000"]["sigma_r2=10000,sigma_beta2=100000"];
    assert_eq!(cell["openings_per_solve"], 2541);
    assert_eq!(v["sigma_convention"], "sigma_r2 and sigma_beta2 are variances (sigma^2)");
}

#[test]
fn regress_csv_output() {
    let o = run(&[
        "regress",
        "--data",
        &boston(),
        "--lambda",
        "10",
        "--repeats",
        "1",
        "--method",
        "insecure-inverse",
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("insecure-inverse,10,")));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["cost", "--dim", "x", "--method", "gauss"]).status.code(), Some(1));
    assert_eq!(run(&["regress", "--data", "/nonexistent.csv"]).status.code(), Some(2));
    assert_eq!(run(&["regress", "--data", &boston(), "--threshold", "9"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn demo_walkthrough() {
    let mut child = bin().args(["demo"]).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(b"6 -1.5\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("6 * -1.5 = -9.000000000"), "{text}");
    assert!(text.contains("reconstructed from parties 1..=4: 6.000000000"));
    let mut child =
        bin().args(["demo"]).stdin(Stdio::piped()).stdout(Stdio::null()).stderr(Stdio::null()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(b"abc").unwrap();
    assert_eq!(child.wait().unwrap().code(), Some(2));
}
