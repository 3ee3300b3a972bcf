use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use saddle_core::certificates::{
    build_certificate, build_certificate_rank, lmi_sweep, CertificateVariant,
};
use saddle_core::equilibrium::{kkt_residual, solve_equilibrium, DEFAULT_TOL};
use saddle_core::experiments::{
    gen_equality_qp, gen_logistic_ineq, gen_two_sided_qp, initial_state, run_experiment,
    ExperimentKind, ExperimentSpec,
};
use saddle_core::integrator::{
    certified_step, practical_step, simulate_with, step_count, SimOptions,
};
use saddle_core::io::{fmt_g17, read_problem, write_problem};
use saddle_core::spectral::{eta_sweep, log_grid, saturation_check, write_sweep_csv};
use saddle_core::{
    ConstrainedProblem, ConstraintKind, DynamicsParams, LmiReport, Objective, PdgdField, Trajectory,
};

use crate::args::{
    CertifyArgs, Command, GainArgs, GenArgs, KktArgs, ProblemArgs, SimulateArgs, SpectrumArgs,
    SweepArgs, VariantArg,
};

/// Inconsistent or malformed flags; reported with exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

/// Runs a subcommand. `Ok(false)` signals a validation failure.
pub fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Certify(a) => certify(a),
        Command::SweepEta(a) => sweep_eta(a),
        Command::Spectrum(a) => spectrum(a),
        Command::KktCheck(a) => kkt_check(a),
        Command::Gen(a) => gen(a),
    }
}

fn generated_sizes(problem: &str) -> Option<(usize, usize)> {
    match problem {
        "eq-qp" => Some((5, 2)),
        "logistic" => Some((10, 8)),
        "ts-qp" => Some((5, 3)),
        _ => None,
    }
}

fn load_problem(a: &ProblemArgs) -> Result<ConstrainedProblem> {
    match generated_sizes(&a.problem) {
        Some((n0, m0)) => {
            let (n, m) = (a.n.unwrap_or(n0), a.m.unwrap_or(m0));
            if n == 0 || m == 0 || m > n {
                return usage(format!("need 1 <= m <= n, got --n {n} --m {m}"));
            }
            let p = match a.problem.as_str() {
                "eq-qp" => gen_equality_qp(a.seed, n, m),
                "logistic" => gen_logistic_ineq(a.seed, n, m, a.n_data, a.reg),
                _ => gen_two_sided_qp(a.seed, n, m),
            };
            Ok(p?)
        }
        None => {
            if a.n.is_some() || a.m.is_some() {
                return usage("--n and --m apply to generated problems only");
            }
            let path = Path::new(&a.problem);
            if !path.exists() {
                return usage(format!(
                    "--problem must be eq-qp, logistic, ts-qp or an existing file, got {:?}",
                    a.problem
                ));
            }
            read_problem(path).with_context(|| format!("reading {}", path.display()))
        }
    }
}

fn params(g: GainArgs) -> Result<DynamicsParams> {
    DynamicsParams::new(g.eta, g.rho).or_else(|e| usage(e.to_string()))
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let parsed = match parts.as_slice() {
        [lo, hi, n] => lo
            .parse::<f64>()
            .ok()
            .zip(hi.parse::<f64>().ok())
            .zip(n.parse::<usize>().ok()),
        _ => None,
    };
    let Some(((lo, hi), n)) = parsed else {
        return usage(format!("--eta-grid expects lo:hi:points, got {spec:?}"));
    };
    log_grid(lo, hi, n).or_else(|e| usage(e.to_string()))
}

struct Metadata(String);

impl Metadata {
    fn new(command: &str, a: &ProblemArgs) -> Self {
        let mut m = Metadata(String::new());
        m.put("command", command);
        m.put("problem", &a.problem);
        if generated_sizes(&a.problem).is_some() {
            m.put("seed", a.seed);
            m.put("rng", "ChaCha8, one stream per matrix");
        }
        if a.problem == "logistic" {
            m.put("n_data", format!("{} (non-paper default)", a.n_data));
            m.put("reg", format!("{} (non-paper default)", fmt_g17(a.reg)));
        }
        m
    }

    fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key}: {value}");
    }

    fn problem(&mut self, p: &ConstrainedProblem) {
        let k = p.bounds();
        self.put("constraints", p.kind());
        self.put("n", p.n());
        self.put("m", p.m());
        self.put("mu", fmt_g17(p.mu()));
        self.put("ell", fmt_g17(p.ell()));
        self.put("kappa1", fmt_g17(k.kappa1));
        self.put("kappa2", fmt_g17(k.kappa2));
    }

    fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("metadata.txt"), &self.0)?;
        Ok(())
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn simulate(a: SimulateArgs) -> Result<bool> {
    let p = load_problem(&a.problem)?;
    let params = params(a.gains)?;
    if !(a.horizon >= 0.0 && a.horizon.is_finite()) {
        return usage("--horizon must be a nonnegative number");
    }
    if a.delta.is_some_and(|d| !(d > 0.0 && d.is_finite())) {
        return usage("--delta must be positive");
    }
    let cert = build_certificate(&p, params)?;
    let step = certified_step(&p, params, &cert);
    let (delta, certified, rule) = match (a.delta, p.kind()) {
        (Some(d), _) => (d, step.as_ref().is_ok_and(|s| d <= s.delta), "user"),
        (None, ConstraintKind::Equality) => (step?.delta, true, "certified"),
        (None, _) => (
            practical_step(&p, params),
            false,
            "practical (not certified)",
        ),
    };
    let eq = solve_equilibrium(&p, params, DEFAULT_TOL)?;
    let z0 = initial_state(a.problem.seed, p.n(), p.m(), p.kind());

    create_dir(&a.out)?;
    let csv = a.out.join("trajectory.csv");
    let mut md = Metadata::new("simulate", &a.problem);
    md.problem(&p);
    md.put("eta", fmt_g17(params.eta));
    md.put("rho", fmt_g17(params.rho));
    md.put("c", fmt_g17(cert.c()));
    md.put("tau", fmt_g17(cert.tau()));
    md.put("delta", fmt_g17(delta));
    md.put("delta_rule", rule);
    md.put("certified", certified);
    md.put("horizon", fmt_g17(a.horizon));

    if a.horizon < delta {
        std::fs::write(&csv, format!("{}\n", Trajectory::CSV_HEADER))?;
        md.write(&a.out)?;
        println!(
            "horizon shorter than one step; wrote empty {}",
            csv.display()
        );
        return Ok(true);
    }
    let steps = step_count(a.horizon, delta);
    let opts = SimOptions {
        stride: steps.div_ceil(a.max_rows.max(1)).max(1),
        keep_states: false,
    };
    let field = PdgdField::new(&p, params);
    let eqs = eq.state();
    let traj = simulate_with(&field, &z0, delta, a.horizon, Some(&cert), Some(&eqs), opts)?;
    traj.write_csv(&csv)?;
    let rate = traj.measured_rate().unwrap_or(f64::NAN);
    md.put("steps", steps);
    md.put("measured_rate", fmt_g17(rate));
    md.write(&a.out)?;

    let d = traj.distances().unwrap_or_default();
    println!("{} problem: n = {}, m = {}", p.kind(), p.n(), p.m());
    println!("c = {}, tau = {}", fmt_g17(cert.c()), fmt_g17(cert.tau()));
    println!("delta = {} ({rule}), steps = {steps}", fmt_g17(delta));
    if let (Some(first), Some(last)) = (d.first(), d.last()) {
        println!("distance {} -> {}", fmt_g17(*first), fmt_g17(*last));
    }
    println!("measured rate = {}", fmt_g17(rate));
    println!("wrote {}", csv.display());
    Ok(true)
}

fn certify(a: CertifyArgs) -> Result<bool> {
    let p = load_problem(&a.problem)?;
    let params = params(a.gains)?;
    let want = match (a.variant, p.kind()) {
        (None, ConstraintKind::Equality) | (Some(VariantArg::Eq), ConstraintKind::Equality) => {
            CertificateVariant::Equality
        }
        (None, ConstraintKind::Inequality)
        | (Some(VariantArg::Ineq), ConstraintKind::Inequality) => CertificateVariant::Inequality,
        (None, ConstraintKind::TwoSided) | (Some(VariantArg::Ts), ConstraintKind::TwoSided) => {
            CertificateVariant::TwoSided
        }
        (Some(VariantArg::Rank), ConstraintKind::Inequality) => CertificateVariant::RankRelaxed,
        (Some(v), kind) => {
            let name = clap::ValueEnum::to_possible_value(&v)
                .map_or_else(String::new, |p| p.get_name().to_string());
            return usage(format!(
                "variant {name} does not apply to {kind} constraints"
            ));
        }
    };
    let (cert, aux) = if want == CertificateVariant::RankRelaxed {
        let eq = solve_equilibrium(&p, params, DEFAULT_TOL)?.state();
        let z0 = initial_state(a.problem.seed, p.n(), p.m(), p.kind());
        let (cert, aux) = build_certificate_rank(&p, params, &z0, &eq)?;
        (cert, Some(aux))
    } else {
        (build_certificate(&p, params)?, None)
    };
    let report = lmi_sweep(&cert, &p, params, a.b_samples, a.problem.seed)?;

    println!("{} problem: n = {}, m = {}", p.kind(), p.n(), p.m());
    println!("variant = {}", cert.variant());
    println!("c = {}", fmt_g17(cert.c()));
    println!("tau = {}", fmt_g17(cert.tau()));
    if let Some(aux) = &aux {
        println!(
            "xi = {}, gamma_bar = {}, active rows = {}",
            fmt_g17(aux.xi),
            fmt_g17(aux.gamma_bar),
            aux.m1
        );
    }
    println!(
        "min LMI margin = {} (tolerance {}) over {} checks{}",
        fmt_g17(report.min_margin),
        fmt_g17(report.psd_tol),
        report.samples_checked,
        if report.exhaustive_gamma {
            ""
        } else {
            " (sampled gain vertices)"
        }
    );
    println!("min Schur margin = {}", fmt_g17(report.min_schur_margin));
    println!(
        "{}",
        if report.pass {
            "LMI holds"
        } else {
            "LMI FAILS"
        }
    );

    if let Some(dir) = &a.out {
        create_dir(dir)?;
        std::fs::write(
            dir.join("lmi.csv"),
            format!("{}\n{}\n", LmiReport::CSV_HEADER, report.csv_row()),
        )?;
        let mut md = Metadata::new("certify", &a.problem);
        md.problem(&p);
        md.put("variant", cert.variant());
        md.put("eta", fmt_g17(params.eta));
        md.put("rho", fmt_g17(params.rho));
        md.put("c", fmt_g17(cert.c()));
        md.put("tau", fmt_g17(cert.tau()));
        md.put("b_samples", a.b_samples);
        md.write(dir)?;
    }
    Ok(report.pass)
}

fn sweep_eta(a: SweepArgs) -> Result<bool> {
    let kind = match a.problem.problem.as_str() {
        "eq-qp" => ExperimentKind::EqualityQp,
        "logistic" => ExperimentKind::LogisticIneq,
        other => {
            return usage(format!(
                "sweep-eta runs on eq-qp or logistic, got {other:?}"
            ))
        }
    };
    let (n0, m0) = generated_sizes(&a.problem.problem).expect("generator");
    let mut spec = ExperimentSpec::new(
        kind,
        a.problem.seed,
        a.problem.n.unwrap_or(n0),
        a.problem.m.unwrap_or(m0),
    );
    spec.params = DynamicsParams::new(1.0, a.rho).or_else(|e| usage(e.to_string()))?;
    spec.eta_grid = Some(parse_grid(&a.eta_grid)?);
    spec.delta = a.delta;
    spec.horizon = a.horizon;
    spec.n_data = a.problem.n_data;
    spec.reg = a.problem.reg;
    spec.max_rows = a.max_rows;
    if spec.m == 0 || spec.m > spec.n {
        return usage(format!(
            "need 1 <= m <= n, got --n {} --m {}",
            spec.n, spec.m
        ));
    }
    let art = run_experiment(&spec, &a.out)?;
    println!("eta, delta, measured_rate, tau/2, spectral_rate");
    for r in &art.rows {
        println!(
            "{}, {}, {}, {}, {}",
            fmt_g17(r.eta),
            fmt_g17(r.delta),
            fmt_g17(r.measured_rate),
            fmt_g17(r.tau_half),
            fmt_g17(r.spectral_rate)
        );
    }
    println!("wrote {}", art.summary.display());
    Ok(true)
}

fn spectrum(a: SpectrumArgs) -> Result<bool> {
    let p = load_problem(&a.problem)?;
    let q = match (p.kind(), p.objective()) {
        (ConstraintKind::Equality, Objective::Quadratic(q)) => q,
        _ => return usage("spectrum needs a quadratic objective with equality constraints"),
    };
    let grid = parse_grid(&a.eta_grid)?;
    let rows = eta_sweep(q.matrix(), p.a(), &grid)?;
    create_dir(&a.out)?;
    let csv = a.out.join("spectrum.csv");
    write_sweep_csv(&rows, &csv)?;
    let sat = saturation_check(q.matrix(), p.a(), &rows)?;

    let mut md = Metadata::new("spectrum", &a.problem);
    md.problem(&p);
    md.put("eta_grid", &a.eta_grid);
    md.put(
        "knee_rule",
        "smallest grid eta after which the rate grows < 5% per decade (non-paper)",
    );
    let bound_ok = rows.iter().all(|r| r.rate >= r.tau_half - 1e-9);
    println!("eta, rate, tau/2");
    for r in &rows {
        println!(
            "{}, {}, {}",
            fmt_g17(r.eta),
            fmt_g17(r.rate),
            fmt_g17(r.tau_half)
        );
    }
    match &sat {
        Some(s) => {
            md.put("eta_hat", fmt_g17(s.eta_hat));
            md.put("rate_10", fmt_g17(s.rate_10));
            md.put("rate_100", fmt_g17(s.rate_100));
            println!(
                "knee at eta = {}; rate(10 eta) = {}, rate(100 eta) = {}",
                fmt_g17(s.eta_hat),
                fmt_g17(s.rate_10),
                fmt_g17(s.rate_100)
            );
        }
        None => println!("no saturation knee on this grid"),
    }
    md.write(&a.out)?;
    if !bound_ok {
        println!("certified bound tau/2 exceeds the exact rate");
    }
    println!("wrote {}", csv.display());
    Ok(bound_ok)
}

fn kkt_check(a: KktArgs) -> Result<bool> {
    if !(a.tol > 0.0) {
        return usage("--tol must be positive");
    }
    let p = load_problem(&a.problem)?;
    let params = params(a.gains)?;
    let eq = solve_equilibrium(&p, params, a.tol.min(DEFAULT_TOL))?;
    let r = kkt_residual(&p, &eq.state());
    println!("{} problem: n = {}, m = {}", p.kind(), p.n(), p.m());
    println!("stationarity = {}", fmt_g17(r.stationarity));
    println!("primal = {}", fmt_g17(r.primal));
    println!("dual = {}", fmt_g17(r.dual));
    println!("complementarity = {}", fmt_g17(r.complementarity));
    println!(
        "total = {} (tolerance {})",
        fmt_g17(r.total()),
        fmt_g17(a.tol)
    );
    println!("active constraints: {:?}", eq.active_set);
    Ok(r.total() <= a.tol)
}

fn gen(a: GenArgs) -> Result<bool> {
    if generated_sizes(&a.problem.problem).is_none() {
        return usage("gen needs a generator: eq-qp, logistic or ts-qp");
    }
    let p = load_problem(&a.problem)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_problem(&p, &a.out)?;
    println!(
        "wrote {} ({} problem, n = {}, m = {})",
        a.out.display(),
        p.kind(),
        p.n(),
        p.m()
    );
    Ok(true)
}
