use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "saddle",
    version,
    about = "Primal-dual gradient dynamics with Lyapunov certificates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the flow with explicit Euler and write the trajectory.
    Simulate(SimulateArgs),
    /// Build a Lyapunov certificate and check its matrix inequality.
    Certify(CertifyArgs),
    /// Run the flow for every η of a log grid and summarize the rates.
    SweepEta(SweepArgs),
    /// Exact decay rate of the linear equality flow over a log grid of η.
    Spectrum(SpectrumArgs),
    /// Solve for the equilibrium and report its KKT residual.
    KktCheck(KktArgs),
    /// Write a generated problem to a file.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Generator (`eq-qp`, `logistic`, `ts-qp`) or a problem file.
    #[arg(long, default_value = "eq-qp")]
    pub problem: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Primal dimension (generators only).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of constraints (generators only).
    #[arg(long)]
    pub m: Option<usize>,
    /// Logistic data points.
    #[arg(long, default_value_t = saddle_core::experiments::DEFAULT_N_DATA)]
    pub n_data: usize,
    /// Logistic ridge weight.
    #[arg(long, default_value_t = saddle_core::experiments::DEFAULT_REG)]
    pub reg: f64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct GainArgs {
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub gains: GainArgs,
    /// Euler step; defaults to the certified step (equality) or the
    /// practical step (augmented flows).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 5.0)]
    pub horizon: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Upper bound on trajectory rows written.
    #[arg(long, default_value_t = 2000)]
    pub max_rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Eq,
    Ineq,
    Ts,
    Rank,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub gains: GainArgs,
    /// Certificate variant; defaults to the one matching the constraints.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Random secant matrices (on top of μI and ℓI).
    #[arg(long, default_value_t = 100)]
    pub b_samples: usize,
    /// Directory for `lmi.csv` and `metadata.txt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// `lo:hi:points`, log spaced.
    #[arg(long, default_value = "0.1:10:3")]
    pub eta_grid: String,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 5.0)]
    pub horizon: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub max_rows: usize,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "0.001:1000:25")]
    pub eta_grid: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KktArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub gains: GainArgs,
    /// Required total KKT residual.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Output problem file.
    #[arg(long)]
    pub out: PathBuf,
}
