use std::path::Path;
use std::process::{Command, Output};

fn saddle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saddle"))
        .args(args)
        .env_remove("SADDLE_THREADS")
        .output()
        .expect("run saddle")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn certify_equality_qp() {
    let o = saddle(&[
        "certify",
        "--problem",
        "eq-qp",
        "--seed",
        "42",
        "--eta",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("c = "));
    assert!(out.contains("tau = "));
    assert!(out.contains("min LMI margin = "));
}

#[test]
fn certify_writes_lmi_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = saddle(&[
        "certify",
        "--problem",
        "ts-qp",
        "--b-samples",
        "10",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("lmi.csv")).unwrap();
    assert!(csv.starts_with("samples_checked,"));
    assert!(dir.path().join("metadata.txt").exists());
}

#[test]
fn rank_variant_on_logistic() {
    let o = saddle(&[
        "certify",
        "--problem",
        "logistic",
        "--variant",
        "rank",
        "--b-samples",
        "5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("variant = rank"));
}

#[test]
fn usage_errors_exit_2() {
    let o = saddle(&["spectrum", "--problem", "logistic"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(
        code(&saddle(&[
            "certify",
            "--problem",
            "eq-qp",
            "--variant",
            "ts"
        ])),
        2
    );
    assert_eq!(code(&saddle(&["simulate", "--eta", "-1"])), 2);
    assert_eq!(code(&saddle(&["sweep-eta", "--eta-grid", "1:2"])), 2);
    assert_eq!(code(&saddle(&["frobnicate"])), 2);
    assert_eq!(
        code(&saddle(&["kkt-check", "--problem", "/no/such/file"])),
        2
    );
}

#[test]
fn simulate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = saddle(&[
        "simulate",
        "--problem",
        "eq-qp",
        "--seed",
        "42",
        "--eta",
        "1",
        "--horizon",
        "5",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,dist_x,dist_lambda,V"));
    assert!(lines.count() > 100);
    let md = std::fs::read_to_string(dir.path().join("metadata.txt")).unwrap();
    assert!(md.contains("delta_rule: certified"));
}

#[test]
fn generated_file_round_trips_through_kkt_check() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.txt");
    let o = saddle(&[
        "gen",
        "--problem",
        "ts-qp",
        "--seed",
        "3",
        "--n",
        "6",
        "--m",
        "4",
        "--out",
        path(&file),
    ]);
    assert_eq!(code(&o), 0);
    let o = saddle(&["kkt-check", "--problem", path(&file)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("total = "));
}

#[test]
fn spectrum_reports_knee() {
    let dir = tempfile::tempdir().unwrap();
    let o = saddle(&["spectrum", "--out", path(dir.path())]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("knee at eta"));
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("eta,rate,tau_half"));
    assert_eq!(csv.lines().count(), 26);
}

#[test]
fn sweep_eta_on_logistic() {
    let dir = tempfile::tempdir().unwrap();
    let o = saddle(&[
        "sweep-eta",
        "--problem",
        "logistic",
        "--eta-grid",
        "0.5:2:3",
        "--horizon",
        "1",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "summary.csv",
        "metadata.txt",
        "plot.py",
        "traj_00.csv",
        "traj_02.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn thread_cap_is_accepted() {
    let o = Command::new(env!("CARGO_BIN_EXE_saddle"))
        .args(["kkt-check", "--problem", "logistic"])
        .env("SADDLE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_saddle"))
        .args(["kkt-check"])
        .env("SADDLE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
