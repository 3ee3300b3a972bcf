//! Seeded problem generators and the η-sweep experiment driver.
//!
//! Every random matrix is drawn from its own ChaCha8 stream: the generator
//! is seeded with the experiment seed and `set_stream(k)` selects the
//! stream, with `k` fixed per matrix (listed on each generator). Output is
//! bit-identical for identical inputs within this implementation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::certificates::{build_certificate, LyapunovCertificate};
use crate::dynamics::{PdgdField, State};
use crate::equilibrium::{solve_equilibrium, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::integrator::{certified_step, practical_step, simulate_with, SimOptions, Trajectory};
use crate::io::fmt_g17;
use crate::linalg::{gaussian_matrix, gaussian_vector};
use crate::parallel::Execution;
use crate::problem::{
    spectral_bounds, ConstrainedProblem, ConstraintKind, ConstraintSet, DynamicsParams,
    LogisticRidge, Quadratic, RANK_REL_TOL,
};
use crate::spectral::{lti_matrix, tau_eq};

/// Default ridge weight of the logistic objective (not given by the
/// reference experiments; needed for strong convexity).
pub const DEFAULT_REG: f64 = 0.1;
/// Default number of synthetic logistic samples.
pub const DEFAULT_N_DATA: usize = 100;

const MAX_REDRAWS: usize = 100;

/// ChaCha8 generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Gaussian `m × n` matrix with full row rank, redrawn (continuing the same
/// stream) until `λ_min(AAᵀ)` clears the rank tolerance.
fn full_rank_gaussian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Result<DMatrix<f64>> {
    for _ in 0..MAX_REDRAWS {
        let a = gaussian_matrix(m, n, rng);
        if spectral_bounds(&a).is_ok() {
            return Ok(a);
        }
    }
    Err(Error::RankDeficient {
        lambda_min: 0.0,
        tol: RANK_REL_TOL,
    })
}

fn check_sizes(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= m <= n, got n = {n}, m = {m}"
        )));
    }
    Ok(())
}

/// `W = 10I + W₀W₀ᵀ` with standard-normal `W₀` (stream 0).
fn random_w(seed: u64, n: usize) -> DMatrix<f64> {
    let w0 = gaussian_matrix(n, n, &mut stream_rng(seed, 0));
    let mut w = &w0 * w0.transpose();
    for i in 0..n {
        w[(i, i)] += 10.0;
    }
    crate::linalg::symmetrize(&w)
}

/// `min ½xᵀWx` s.t. `Ax = b` with `W = 10I + W₀W₀ᵀ`.
///
/// Streams: 0 → `W₀`, 1 → `A`, 2 → `b`.
pub fn gen_equality_qp(seed: u64, n: usize, m: usize) -> Result<ConstrainedProblem> {
    check_sizes(n, m)?;
    let w = random_w(seed, n);
    let a = full_rank_gaussian(&mut stream_rng(seed, 1), m, n)?;
    let b = gaussian_vector(m, &mut stream_rng(seed, 2));
    ConstrainedProblem::new(
        Quadratic::new(w, DVector::zeros(n))?,
        ConstraintSet::Equality { a, b },
    )
}

/// Ridge logistic regression on synthetic data subject to `Ax ≤ b`.
///
/// Streams: 0 → features `D` (`n_data × n`), 1 → labels (fair ±1),
/// 2 → `A`, 3 → `b`.
pub fn gen_logistic_ineq(
    seed: u64,
    n: usize,
    m: usize,
    n_data: usize,
    reg: f64,
) -> Result<ConstrainedProblem> {
    check_sizes(n, m)?;
    if n_data == 0 {
        return Err(Error::InvalidParameter(
            "need at least one data point".into(),
        ));
    }
    let d = gaussian_matrix(n_data, n, &mut stream_rng(seed, 0));
    let mut lr = stream_rng(seed, 1);
    let y = DVector::from_fn(n_data, |_, _| if lr.random::<bool>() { 1.0 } else { -1.0 });
    let a = full_rank_gaussian(&mut stream_rng(seed, 2), m, n)?;
    let b = gaussian_vector(m, &mut stream_rng(seed, 3));
    ConstrainedProblem::new(
        LogisticRidge::new(d, y, reg)?,
        ConstraintSet::Inequality { a, b },
    )
}

/// `min ½xᵀWx + qᵀx` s.t. `lo ≤ Ax ≤ hi`, with `W` as in
/// [`gen_equality_qp`], `q = 10·N(0, I)` pushing the unconstrained optimum
/// out of the box, band centres `N(0, 1)` and half-widths uniform in
/// `[0.1, 1]`.
///
/// Streams: 0 → `W₀`, 1 → `A`, 2 → centres, 3 → half-widths, 4 → `q`.
pub fn gen_two_sided_qp(seed: u64, n: usize, m: usize) -> Result<ConstrainedProblem> {
    check_sizes(n, m)?;
    let w = random_w(seed, n);
    let a = full_rank_gaussian(&mut stream_rng(seed, 1), m, n)?;
    let centre = gaussian_vector(m, &mut stream_rng(seed, 2));
    let mut hr = stream_rng(seed, 3);
    let half = DVector::from_fn(m, |_, _| hr.random_range(0.1..1.0));
    let q = gaussian_vector(n, &mut stream_rng(seed, 4)) * 10.0;
    ConstrainedProblem::new(
        Quadratic::new(w, q)?,
        ConstraintSet::TwoSided {
            a,
            lo: &centre - &half,
            hi: &centre + &half,
        },
    )
}

/// Seeded initial state (stream 10): `x ~ N(0, I)`; `λ ~ N(0, I)`, folded
/// to `|λ|` for one-sided inequalities.
pub fn initial_state(seed: u64, n: usize, m: usize, kind: ConstraintKind) -> State {
    let mut rng = stream_rng(seed, 10);
    let x = gaussian_vector(n, &mut rng);
    let lambda = DVector::from_fn(m, |_, _| {
        let v: f64 = rng.sample(StandardNormal);
        if kind == ConstraintKind::Inequality {
            v.abs()
        } else {
            v
        }
    });
    State::new(x, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    EqualityQp,
    LogisticIneq,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::EqualityQp => "equality-qp",
            ExperimentKind::LogisticIneq => "logistic-ineq",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    /// `η` used when `eta_grid` is absent, and `ρ` for the augmented flow.
    pub params: DynamicsParams,
    pub eta_grid: Option<Vec<f64>>,
    /// Fixed Euler step; `None` picks the certified step for equality
    /// problems and [`practical_step`] for inequality problems.
    pub delta: Option<f64>,
    pub horizon: f64,
    pub n_data: usize,
    pub reg: f64,
    /// Upper bound on the rows written per trajectory CSV.
    pub max_rows: usize,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, seed: u64, n: usize, m: usize) -> Self {
        ExperimentSpec {
            kind,
            seed,
            n,
            m,
            params: DynamicsParams { eta: 1.0, rho: 1.0 },
            eta_grid: None,
            delta: None,
            horizon: 5.0,
            n_data: DEFAULT_N_DATA,
            reg: DEFAULT_REG,
            max_rows: 2000,
        }
    }

    pub fn etas(&self) -> Vec<f64> {
        self.eta_grid
            .clone()
            .unwrap_or_else(|| vec![self.params.eta])
    }

    pub fn problem(&self) -> Result<ConstrainedProblem> {
        match self.kind {
            ExperimentKind::EqualityQp => gen_equality_qp(self.seed, self.n, self.m),
            ExperimentKind::LogisticIneq => {
                gen_logistic_ineq(self.seed, self.n, self.m, self.n_data, self.reg)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be >= 0, got {}",
                self.horizon
            )));
        }
        if self.delta.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::InvalidParameter("delta must be positive".into()));
        }
        if self.etas().iter().any(|&e| !(e > 0.0 && e.is_finite())) || self.etas().is_empty() {
            return Err(Error::InvalidParameter(
                "eta values must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub eta: f64,
    pub rho: f64,
    pub delta: f64,
    /// Whether `delta` satisfies the discretization certificate.
    pub certified: bool,
    pub steps: usize,
    pub c: f64,
    pub tau: f64,
    pub measured_rate: f64,
    pub tau_half: f64,
    /// Exact LTI rate (equality QPs only; NaN otherwise).
    pub spectral_rate: f64,
}

pub const SUMMARY_HEADER: &str =
    "eta,rho,delta,certified,steps,c,tau,measured_rate,tau_half,spectral_rate";

impl SummaryRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_g17(self.eta),
            fmt_g17(self.rho),
            fmt_g17(self.delta),
            self.certified,
            self.steps,
            fmt_g17(self.c),
            fmt_g17(self.tau),
            fmt_g17(self.measured_rate),
            fmt_g17(self.tau_half),
            fmt_g17(self.spectral_rate)
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentArtifacts {
    pub trajectories: Vec<PathBuf>,
    pub summary: PathBuf,
    pub metadata: PathBuf,
    pub plot_script: PathBuf,
    pub rows: Vec<SummaryRow>,
}

struct EtaRun {
    row: SummaryRow,
    trajectory: Option<Trajectory>,
}

fn run_one(spec: &ExperimentSpec, p: &ConstrainedProblem, eta: f64) -> Result<EtaRun> {
    let params = DynamicsParams::new(eta, spec.params.rho)?;
    let cert: LyapunovCertificate = build_certificate(p, params)?;
    let (delta, certified) = match (spec.delta, p.kind()) {
        (Some(d), _) => {
            let sc = certified_step(p, params, &cert);
            (d, sc.is_ok_and(|sc| d <= sc.delta))
        }
        (None, ConstraintKind::Equality) => (certified_step(p, params, &cert)?.delta, true),
        (None, _) => (practical_step(p, params), false),
    };
    let eq = solve_equilibrium(p, params, DEFAULT_TOL)?.state();
    let z0 = initial_state(spec.seed, p.n(), p.m(), p.kind());
    let spectral_rate = match p.objective().as_quadratic() {
        Some(q) if p.kind() == ConstraintKind::Equality => {
            lti_matrix(q.matrix(), p.a(), eta)?.rate()
        }
        _ => f64::NAN,
    };
    let k = p.bounds();
    let tau_half = match p.kind() {
        ConstraintKind::Equality => tau_eq(eta, p.mu(), p.ell(), k.kappa1, k.kappa2) / 2.0,
        _ => cert.tau() / 2.0,
    };
    let (trajectory, steps, measured_rate) = if spec.horizon >= delta {
        let steps = crate::integrator::step_count(spec.horizon, delta);
        let opts = SimOptions {
            stride: steps.div_ceil(spec.max_rows.max(1)).max(1),
            keep_states: false,
        };
        let field = PdgdField::new(p, params);
        let traj = simulate_with(
            &field,
            &z0,
            delta,
            spec.horizon,
            Some(&cert),
            Some(&eq),
            opts,
        )?;
        let rate = traj.measured_rate().unwrap_or(f64::NAN);
        (Some(traj), steps, rate)
    } else {
        (None, 0, f64::NAN)
    };
    Ok(EtaRun {
        row: SummaryRow {
            eta,
            rho: params.rho,
            delta,
            certified,
            steps,
            c: cert.c(),
            tau: cert.tau(),
            measured_rate,
            tau_half,
            spectral_rate,
        },
        trajectory,
    })
}

/// Runs the flow for every `η` of the spec and writes, into `out_dir`:
/// one `traj_XX.csv` per `η` (`t,dist_x,dist_lambda,V`), `summary.csv`,
/// `metadata.txt` and `plot.py`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<ExperimentArtifacts> {
    run_experiment_with(spec, out_dir, Execution::default())
}

pub fn run_experiment_with(
    spec: &ExperimentSpec,
    out_dir: &Path,
    exec: Execution,
) -> Result<ExperimentArtifacts> {
    spec.validate()?;
    let p = spec.problem()?;
    let etas = spec.etas();
    let runs: Vec<EtaRun> = exec
        .map(&etas, |&eta| run_one(spec, &p, eta))
        .into_iter()
        .collect::<Result<_>>()?;

    std::fs::create_dir_all(out_dir)?;
    let mut trajectories = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let path = out_dir.join(format!("traj_{i:02}.csv"));
        match &run.trajectory {
            Some(t) => t.write_csv(&path)?,
            None => std::fs::write(&path, format!("{}\n", Trajectory::CSV_HEADER))?,
        }
        trajectories.push(path);
    }

    let summary = out_dir.join("summary.csv");
    let mut text = format!("{SUMMARY_HEADER}\n");
    for run in &runs {
        text.push_str(&run.row.csv());
        text.push('\n');
    }
    std::fs::write(&summary, text)?;

    let metadata = out_dir.join("metadata.txt");
    std::fs::write(&metadata, metadata_text(spec, &p, &etas))?;

    let plot_script = out_dir.join("plot.py");
    std::fs::write(&plot_script, PLOT_SCRIPT)?;

    Ok(ExperimentArtifacts {
        trajectories,
        summary,
        metadata,
        plot_script,
        rows: runs.into_iter().map(|r| r.row).collect(),
    })
}

fn metadata_text(spec: &ExperimentSpec, p: &ConstrainedProblem, etas: &[f64]) -> String {
    let k = p.bounds();
    let mut s = String::new();
    let grid: Vec<String> = etas.iter().map(|e| fmt_g17(*e)).collect();
    let _ = writeln!(s, "kind: {}", spec.kind);
    let _ = writeln!(s, "seed: {}", spec.seed);
    let _ = writeln!(s, "n: {}", spec.n);
    let _ = writeln!(s, "m: {}", spec.m);
    let _ = writeln!(s, "eta_grid: [{}]", grid.join(", "));
    let _ = writeln!(s, "rho: {}", fmt_g17(spec.params.rho));
    let _ = writeln!(s, "horizon: {}", fmt_g17(spec.horizon));
    let _ = writeln!(
        s,
        "delta: {}",
        spec.delta.map_or_else(|| "auto".to_string(), fmt_g17)
    );
    let _ = writeln!(s, "mu: {}", fmt_g17(p.mu()));
    let _ = writeln!(s, "ell: {}", fmt_g17(p.ell()));
    let _ = writeln!(s, "kappa1: {}", fmt_g17(k.kappa1));
    let _ = writeln!(s, "kappa2: {}", fmt_g17(k.kappa2));
    let _ = writeln!(s, "rng: ChaCha8, one stream per matrix");
    if spec.kind == ExperimentKind::LogisticIneq {
        let _ = writeln!(s, "n_data: {} (non-paper default)", spec.n_data);
        let _ = writeln!(s, "reg: {} (non-paper default)", fmt_g17(spec.reg));
        let _ = writeln!(
            s,
            "delta_rule: practical step 2^-k <= min(1/nu, rho/eta) (not certified)"
        );
    } else {
        let _ = writeln!(
            s,
            "delta_rule: largest 2^-k with r <= exp(-tau*delta/4) (non-paper)"
        );
    }
    let _ = writeln!(
        s,
        "measured_rate: least squares on log distance, final 50% of samples above 1e-13*d0"
    );
    s
}

const PLOT_SCRIPT: &str = r#"# Plots the trajectories and the rate summary written next to this file.
import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))

with open(os.path.join(here, "summary.csv")) as f:
    summary = list(csv.DictReader(f))

fig, ax = plt.subplots(1, 2, figsize=(11, 4))
for path, row in zip(sorted(glob.glob(os.path.join(here, "traj_*.csv"))), summary):
    with open(path) as f:
        rows = list(csv.DictReader(f))
    if not rows:
        continue
    t = [float(r["t"]) for r in rows]
    d = [(float(r["dist_x"]) ** 2 + float(r["dist_lambda"]) ** 2) ** 0.5 for r in rows]
    ax[0].semilogy(t, d, label="eta = %s" % row["eta"])
ax[0].set_xlabel("t")
ax[0].set_ylabel("distance to equilibrium")
ax[0].legend()

eta = [float(r["eta"]) for r in summary]
ax[1].loglog(eta, [float(r["measured_rate"]) for r in summary], "o-", label="measured")
ax[1].loglog(eta, [float(r["tau_half"]) for r in summary], "s--", label="certified tau/2")
spectral = [float(r["spectral_rate"]) for r in summary]
if all(s == s for s in spectral):
    ax[1].loglog(eta, spectral, "^-", label="spectral")
ax[1].set_xlabel("eta")
ax[1].set_ylabel("rate")
ax[1].legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "rates.png"), dpi=150)
"#;
