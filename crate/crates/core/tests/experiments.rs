use saddle_core::experiments::{run_experiment, ExperimentKind, ExperimentSpec, SUMMARY_HEADER};
use saddle_core::{DynamicsParams, Trajectory};

fn read(path: &std::path::Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn equality_sweep_beats_certified_rate() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(ExperimentKind::EqualityQp, 42, 5, 2);
    spec.eta_grid = Some(vec![0.1, 1.0, 10.0]);
    let art = run_experiment(&spec, dir.path()).unwrap();
    assert_eq!(art.trajectories.len(), 3);
    for t in &art.trajectories {
        let text = read(t);
        assert!(text.starts_with(&format!("{}\n", Trajectory::CSV_HEADER)));
        assert!(text.lines().count() > 100);
    }
    let summary = read(&art.summary);
    assert_eq!(summary.lines().next().unwrap(), SUMMARY_HEADER);
    assert_eq!(summary.lines().count(), 4);
    for r in &art.rows {
        assert!(r.certified);
        assert!(
            r.measured_rate >= r.tau_half,
            "eta {}: {} < {}",
            r.eta,
            r.measured_rate,
            r.tau_half
        );
        assert!(r.spectral_rate >= r.tau_half);
    }
    assert!(read(&art.metadata).contains("seed: 42"));
    assert!(read(&art.plot_script).contains("summary.csv"));
}

#[test]
fn logistic_sweep_keeps_rho_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(ExperimentKind::LogisticIneq, 7, 10, 8);
    spec.eta_grid = Some(vec![0.5, 1.0, 2.0]);
    spec.horizon = 2.0;
    let art = run_experiment(&spec, dir.path()).unwrap();
    let summary = read(&art.summary);
    for line in summary.lines().skip(1) {
        assert_eq!(line.split(',').nth(1), Some("1"));
    }
    assert!(art
        .rows
        .iter()
        .all(|r| !r.certified && r.spectral_rate.is_nan()));
    let md = read(&art.metadata);
    assert!(md.contains("reg: 0.10000000000000001 (non-paper default)"));
    assert!(md.contains("n_data: 100 (non-paper default)"));
}

#[test]
fn zero_horizon_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(ExperimentKind::EqualityQp, 1, 4, 2);
    spec.horizon = 0.0;
    let art = run_experiment(&spec, dir.path()).unwrap();
    assert_eq!(
        read(&art.trajectories[0]),
        format!("{}\n", Trajectory::CSV_HEADER)
    );
    assert_eq!(read(&art.summary).lines().count(), 2);
    assert_eq!(art.rows[0].steps, 0);
}

#[test]
fn output_is_deterministic() {
    let mut spec = ExperimentSpec::new(ExperimentKind::LogisticIneq, 11, 6, 4);
    spec.params = DynamicsParams { eta: 1.0, rho: 2.0 };
    spec.eta_grid = Some(vec![0.5, 2.0]);
    spec.horizon = 1.0;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_experiment(&spec, a.path()).unwrap();
    let rb = run_experiment(&spec, b.path()).unwrap();
    for (x, y) in ra.trajectories.iter().zip(&rb.trajectories) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    assert_eq!(
        std::fs::read(&ra.summary).unwrap(),
        std::fs::read(&rb.summary).unwrap()
    );
    assert_eq!(
        std::fs::read(&ra.metadata).unwrap(),
        std::fs::read(&rb.metadata).unwrap()
    );
}

#[test]
fn rejects_bad_specs() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(ExperimentKind::EqualityQp, 1, 4, 2);
    spec.horizon = -1.0;
    assert!(run_experiment(&spec, dir.path()).is_err());
    let mut spec = ExperimentSpec::new(ExperimentKind::EqualityQp, 1, 2, 4);
    spec.horizon = 1.0;
    assert!(run_experiment(&spec, dir.path()).is_err());
    let mut spec = ExperimentSpec::new(ExperimentKind::EqualityQp, 1, 4, 2);
    spec.eta_grid = Some(vec![1.0, -1.0]);
    assert!(run_experiment(&spec, dir.path()).is_err());
}
