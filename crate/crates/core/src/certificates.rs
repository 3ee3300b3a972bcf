//! Quadratic Lyapunov certificates `V(z) = (z − z*)ᵀ P (z − z*)` with
//!
//! ```text
//! P = [ ηc·I   ηAᵀ ]
//!     [ ηA     c·I ]
//! ```
//!
//! and numerical verification of the matrix inequality
//! `−GᵀP − PG ⪰ τP` over all secant matrices `μI ⪯ B ⪯ ℓI` and gain
//! matrices `Γ = diag(γ) ∈ [0, 1]^m`.
//!
//! `G` is affine in `Γ`, so the `Γ`-dependence is covered exactly by the
//! `2^m` vertices of the box. `B` ranges over a matrix interval and is
//! sampled, so the `B`-dependence is verified only probabilistically.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::State;
use crate::equilibrium::active_set;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{random_orthogonal, sym_eig_extremes, sym_lambda_min, sym_norm};
use crate::parallel::Execution;
use crate::problem::{ConstrainedProblem, ConstraintKind, DynamicsParams, RowBound};

/// Relative tolerance used for every PSD test in this module.
pub const PSD_REL_TOL: f64 = 1e-8;

/// Largest `m` for which all `2^m` gain vertices are enumerated.
pub const MAX_EXHAUSTIVE_ROWS: usize = 16;

/// Number of random vertices checked when `m` is too large to enumerate.
pub const SAMPLED_VERTICES: usize = 512;

/// Which flow (and which choice of `c`, `τ`) a certificate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateVariant {
    /// Equality constraints: `c = 4·max(ℓ, ηκ₂/μ)`, `τ = ηκ₁/c`.
    Equality,
    /// One-sided inequalities, augmented Lagrangian: `τ = ηκ₁/(2c)`.
    Inequality,
    /// Two-sided bands; same `P` and `τ` as [`Self::Inequality`].
    TwoSided,
    /// Inequalities where only the active rows need full rank; `c` from
    /// [`solve_c_rank`].
    RankRelaxed,
}

impl std::fmt::Display for CertificateVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CertificateVariant::Equality => "eq",
            CertificateVariant::Inequality => "ineq",
            CertificateVariant::TwoSided => "ts",
            CertificateVariant::RankRelaxed => "rank",
        })
    }
}

#[derive(Debug, Clone)]
pub struct LyapunovCertificate {
    p: DMatrix<f64>,
    n: usize,
    c: f64,
    tau: f64,
    eta: f64,
    variant: CertificateVariant,
    /// Upper bound on each `γⱼ` (all ones except the inactive rows of the
    /// rank-relaxed variant).
    gamma_caps: DVector<f64>,
    p_extremes: (f64, f64),
}

impl LyapunovCertificate {
    /// Assembles a certificate from its constants. Fails if `P` is not
    /// positive definite.
    pub fn from_constants(
        a: &DMatrix<f64>,
        eta: f64,
        c: f64,
        tau: f64,
        variant: CertificateVariant,
        gamma_caps: DVector<f64>,
    ) -> Result<Self> {
        check_dim("gamma caps", a.nrows(), gamma_caps.len())?;
        if !(c > 0.0 && tau > 0.0 && eta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "certificate constants must be positive (c = {c}, tau = {tau}, eta = {eta})"
            )));
        }
        let p = lyapunov_matrix(a, eta, c);
        if Cholesky::new(p.clone()).is_none() {
            return Err(Error::InvalidParameter(format!(
                "P is not positive definite for c = {c}, eta = {eta}"
            )));
        }
        let p_extremes = sym_eig_extremes(&p);
        Ok(LyapunovCertificate {
            p,
            n: a.ncols(),
            c,
            tau,
            eta,
            variant,
            gamma_caps,
            p_extremes,
        })
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    /// Decay rate of `V`: `dV/dt ≤ −τV`. Distances decay at `τ/2`.
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn variant(&self) -> CertificateVariant {
        self.variant
    }
    pub fn gamma_caps(&self) -> &DVector<f64> {
        &self.gamma_caps
    }
    pub fn lambda_min_p(&self) -> f64 {
        self.p_extremes.0
    }
    pub fn lambda_max_p(&self) -> f64 {
        self.p_extremes.1
    }
    /// `κ_P = λ_max(P) / λ_min(P)`.
    pub fn condition_number(&self) -> f64 {
        self.p_extremes.1 / self.p_extremes.0
    }

    /// Same certificate with a different `τ` (used to probe tightness).
    pub fn with_tau(&self, tau: f64) -> Self {
        LyapunovCertificate {
            tau,
            ..self.clone()
        }
    }

    /// `(z − z*)ᵀ P (z − z*)`, evaluated block-wise.
    pub fn value(&self, s: &State, eq: &State) -> f64 {
        let n = self.n;
        let dx = &s.x - &eq.x;
        let dl = &s.lambda - &eq.lambda;
        let m = dl.len();
        let cross = self.p.view((n, 0), (m, n)) * &dx;
        self.eta * self.c * dx.norm_squared() + self.c * dl.norm_squared() + 2.0 * dl.dot(&cross)
    }

    /// `‖z − z*‖_P = √V`.
    pub fn p_norm(&self, s: &State, eq: &State) -> f64 {
        self.value(s, eq).max(0.0).sqrt()
    }
}

/// `[[ηcI, ηAᵀ], [ηA, cI]]`.
pub fn lyapunov_matrix(a: &DMatrix<f64>, eta: f64, c: f64) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let mut p = DMatrix::zeros(n + m, n + m);
    p.view_mut((0, 0), (n, n)).fill_diagonal(eta * c);
    p.view_mut((n, n), (m, m)).fill_diagonal(c);
    p.view_mut((n, 0), (m, n)).copy_from(&(a * eta));
    p.view_mut((0, n), (n, m)).copy_from(&(a.transpose() * eta));
    p
}

/// Certificate for the equality-constrained flow.
pub fn build_certificate_eq(
    p: &ConstrainedProblem,
    params: DynamicsParams,
) -> Result<LyapunovCertificate> {
    p.expect_kind(ConstraintKind::Equality)?;
    let eta = params.eta;
    let k = p.bounds();
    let c = 4.0 * p.ell().max(eta * k.kappa2 / p.mu());
    let tau = eta * k.kappa1 / c;
    LyapunovCertificate::from_constants(
        p.a(),
        eta,
        c,
        tau,
        CertificateVariant::Equality,
        DVector::from_element(p.m(), 1.0),
    )
}

/// `c` of the inequality (and two-sided) certificate.
pub fn ineq_c(mu: f64, ell: f64, kappa1: f64, kappa2: f64, eta: f64, rho: f64) -> f64 {
    let f1 = (rho * kappa2 / mu).max(ell / mu);
    let f2 = (eta / (ell * rho)).max(ell / mu);
    20.0 * ell * f1 * f1 * f2 * f2 * (kappa2 / kappa1)
}

/// Certificate for the augmented flows (one-sided or two-sided).
pub fn build_certificate_ineq(
    p: &ConstrainedProblem,
    params: DynamicsParams,
) -> Result<LyapunovCertificate> {
    let variant = match p.kind() {
        ConstraintKind::Inequality => CertificateVariant::Inequality,
        ConstraintKind::TwoSided => CertificateVariant::TwoSided,
        found => {
            return Err(Error::WrongConstraintKind {
                expected: ConstraintKind::Inequality,
                found,
            })
        }
    };
    let k = p.bounds();
    let c = ineq_c(p.mu(), p.ell(), k.kappa1, k.kappa2, params.eta, params.rho);
    let tau = params.eta * k.kappa1 / (2.0 * c);
    LyapunovCertificate::from_constants(
        p.a(),
        params.eta,
        c,
        tau,
        variant,
        DVector::from_element(p.m(), 1.0),
    )
}

/// Certificate matching the problem's constraint kind.
pub fn build_certificate(
    p: &ConstrainedProblem,
    params: DynamicsParams,
) -> Result<LyapunovCertificate> {
    match p.kind() {
        ConstraintKind::Equality => build_certificate_eq(p, params),
        _ => build_certificate_ineq(p, params),
    }
}

/// Trajectory-dependent constants of the rank-relaxed certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct RankCertificateAux {
    /// Bound on `|ρ(aⱼᵀx − bⱼ) + λⱼ|` along the whole trajectory.
    pub xi: f64,
    /// Bound on `γⱼ` for inactive rows, `ξ/(ξ + ρε)`.
    pub gamma_bar: f64,
    /// Smallest slack of an inactive row (`+∞` when every row is active).
    pub eps_slack: f64,
    /// Number of active rows.
    pub m1: usize,
    pub active: Vec<usize>,
}

/// Computes `ξ(z(0))`, the slack `ε` and `γ̄ = ξ/(ξ + ρε)`.
pub fn xi_bound(
    p: &ConstrainedProblem,
    params: DynamicsParams,
    z0: &State,
    eq: &State,
) -> Result<RankCertificateAux> {
    p.expect_kind(ConstraintKind::Inequality)?;
    check_dim("initial x", p.n(), z0.x.len())?;
    check_dim("initial lambda", p.m(), z0.lambda.len())?;
    check_dim("equilibrium x", p.n(), eq.x.len())?;
    check_dim("equilibrium lambda", p.m(), eq.lambda.len())?;
    let DynamicsParams { eta, rho } = params;
    let a = p.a();
    let active = active_set(p, &eq.x);
    let mut eps = f64::INFINITY;
    for j in (0..p.m()).filter(|j| !active.contains(j)) {
        let b = match p.constraints().row_bound(j) {
            Some(RowBound::Upper(b)) => b,
            _ => unreachable!("inequality rows have upper bounds"),
        };
        let slack = b - a.row(j).dot(&eq.x.transpose());
        if slack <= 0.0 {
            return Err(Error::NoSlack { row: j, slack });
        }
        eps = eps.min(slack);
    }
    let spread =
        ((&z0.x - &eq.x).norm_squared() + (&z0.lambda - &eq.lambda).norm_squared() / eta).sqrt();
    let x_norm = eq.x.norm();
    let lam_norm = eq.lambda.norm();
    let xi = (0..p.m())
        .map(|j| {
            let aj = a.row(j).norm();
            let bj = match p.constraints().row_bound(j) {
                Some(RowBound::Upper(b)) => b,
                _ => 0.0,
            };
            (rho * aj + eta.sqrt()) * spread + rho * aj * x_norm + rho * bj.abs() + lam_norm
        })
        .fold(0.0, f64::max);
    let gamma_bar = if eps.is_infinite() {
        0.0
    } else {
        xi / (xi + rho * eps)
    };
    Ok(RankCertificateAux {
        xi,
        gamma_bar,
        eps_slack: eps,
        m1: active.len(),
        active,
    })
}

/// Constants entering the three lower bounds on `c` of the rank-relaxed
/// certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankConstants {
    pub mu: f64,
    pub ell: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub eta: f64,
    pub rho: f64,
    pub gamma_bar: f64,
}

impl RankConstants {
    /// Slack of each inequality at `c` (`≥ 0` means satisfied):
    ///
    /// 1. `c − ρκ₂`
    /// 2. `½ηκ₁[2ηc(1 − γ̄)/ρ − 2ηκ₂ − ηκ₁] − (2ηκ₂)²`
    /// 3. `2ηcμ − η²κ₂ − η²κ₁/2 − (2κ₂/(ηκ₁))(ηℓ + ηρκ₂ + η²/ρ + η²κ₁/(2c))²`
    pub fn margins(&self, c: f64) -> [f64; 3] {
        let RankConstants {
            mu,
            ell,
            kappa1: k1,
            kappa2: k2,
            eta,
            rho,
            gamma_bar,
        } = *self;
        let g1 = c - rho * k2;
        let g2 =
            0.5 * eta * k1 * (2.0 * eta * c / rho * (1.0 - gamma_bar) - 2.0 * eta * k2 - eta * k1)
                - (2.0 * eta * k2).powi(2);
        let inner = eta * ell + eta * rho * k2 + eta * eta / rho + eta * eta * k1 / (2.0 * c);
        let g3 = 2.0 * eta * c * mu
            - eta * eta * k2
            - eta * eta * k1 / 2.0
            - 2.0 * k2 / (eta * k1) * inner * inner;
        [g1, g2, g3]
    }

    /// Smallest `c` satisfying each inequality on its own.
    pub fn lower_bounds(&self) -> Result<[f64; 3]> {
        if !(self.gamma_bar >= 0.0 && self.gamma_bar < 1.0) {
            return Err(Error::Infeasible(format!(
                "gamma_bar = {} must lie in [0, 1)",
                self.gamma_bar
            )));
        }
        let RankConstants {
            kappa1: k1,
            kappa2: k2,
            eta,
            rho,
            gamma_bar,
            ..
        } = *self;
        let c1 = rho * k2;
        let c2 = rho / (2.0 * eta * (1.0 - gamma_bar))
            * (8.0 * eta * k2 * k2 / k1 + 2.0 * eta * k2 + eta * k1);
        // The third slack is increasing in c and tends to −∞ as c → 0⁺.
        let g3 = |c: f64| self.margins(c)[2];
        let mut hi = 1.0_f64;
        while g3(hi) < 0.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Infeasible("third inequality has no solution".into()));
            }
        }
        let mut lo = hi / 2.0;
        while g3(lo) >= 0.0 && lo > f64::MIN_POSITIVE {
            hi = lo;
            lo /= 2.0;
        }
        while hi - lo > 1e-6 * 0.5 {
            let mid = 0.5 * (lo + hi);
            if g3(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok([c1, c2, hi])
    }

    pub fn solve_c(&self) -> Result<f64> {
        let [c1, c2, c3] = self.lower_bounds()?;
        Ok(c1.max(c2).max(c3))
    }
}

/// Smallest `c` (to within `1e-6`) satisfying the three lower bounds of the
/// rank-relaxed certificate.
pub fn solve_c_rank(
    mu: f64,
    ell: f64,
    kappa1: f64,
    kappa2: f64,
    eta: f64,
    rho: f64,
    gamma_bar: f64,
) -> Result<f64> {
    RankConstants {
        mu,
        ell,
        kappa1,
        kappa2,
        eta,
        rho,
        gamma_bar,
    }
    .solve_c()
}

/// Rank-relaxed certificate for `Ax ≤ b` started at `z0`.
///
/// `κ₁` is `λ_min(A₁A₁ᵀ)` over the active rows; with no active row it is
/// unconstrained by the argument and `κ₂` is used. `κ₂ = λ_max(AAᵀ)` is
/// recomputed, so the problem's declared `κ₁` is ignored and `A` itself
/// may be rank deficient.
pub fn build_certificate_rank(
    p: &ConstrainedProblem,
    params: DynamicsParams,
    z0: &State,
    eq: &State,
) -> Result<(LyapunovCertificate, RankCertificateAux)> {
    let aux = xi_bound(p, params, z0, eq)?;
    let a = p.a();
    let kappa2 = sym_eig_extremes(&(a * a.transpose())).1;
    let kappa1 = if aux.m1 == 0 {
        kappa2
    } else {
        let a1 = a.select_rows(aux.active.iter());
        let k1 = sym_lambda_min(&(&a1 * a1.transpose()));
        let tol = crate::problem::RANK_REL_TOL * kappa2;
        if k1 <= tol {
            return Err(Error::RankDeficient {
                lambda_min: k1,
                tol,
            });
        }
        k1
    };
    let consts = RankConstants {
        mu: p.mu(),
        ell: p.ell(),
        kappa1,
        kappa2,
        eta: params.eta,
        rho: params.rho,
        gamma_bar: aux.gamma_bar,
    };
    let c = consts.solve_c()?;
    let tau = params.eta * kappa1 / (2.0 * c);
    let caps = DVector::from_fn(p.m(), |j, _| {
        if aux.active.contains(&j) {
            1.0
        } else {
            aux.gamma_bar
        }
    });
    let cert = LyapunovCertificate::from_constants(
        a,
        params.eta,
        c,
        tau,
        CertificateVariant::RankRelaxed,
        caps,
    )?;
    Ok((cert, aux))
}

/// Linearized system matrix `G(B, Γ)`.
pub fn system_matrix(
    variant: CertificateVariant,
    a: &DMatrix<f64>,
    params: DynamicsParams,
    b: &DMatrix<f64>,
    gamma: &DVector<f64>,
) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let DynamicsParams { eta, rho } = params;
    let mut g = DMatrix::zeros(n + m, n + m);
    match variant {
        CertificateVariant::Equality => {
            g.view_mut((0, 0), (n, n)).copy_from(&(-b));
            g.view_mut((0, n), (n, m)).copy_from(&(-a.transpose()));
            g.view_mut((n, 0), (m, n)).copy_from(&(a * eta));
        }
        _ => {
            let ga = DMatrix::from_fn(m, n, |i, j| gamma[i] * a[(i, j)]);
            g.view_mut((0, 0), (n, n))
                .copy_from(&(-b - a.transpose() * &ga * rho));
            g.view_mut((0, n), (n, m)).copy_from(&(-ga.transpose()));
            g.view_mut((n, 0), (m, n)).copy_from(&(&ga * eta));
            g.view_mut((n, n), (m, m))
                .set_diagonal(&gamma.map(|gj| eta / rho * (gj - 1.0)));
        }
    }
    g
}

/// `−GᵀP − PG − τP`.
pub fn lmi_matrix(
    cert: &LyapunovCertificate,
    a: &DMatrix<f64>,
    params: DynamicsParams,
    b: &DMatrix<f64>,
    gamma: &DVector<f64>,
) -> DMatrix<f64> {
    let g = system_matrix(cert.variant, a, params, b, gamma);
    let pg = &cert.p * g;
    -(&pg + pg.transpose()) - &cert.p * cert.tau
}

/// Smallest eigenvalue of `−GᵀP − PG − τP` and its Schur-complement form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmiMargins {
    /// `λ_min` of the whole matrix.
    pub full: f64,
    /// `λ_min(Q₂ − Q₃ᵀQ₁⁻¹Q₃)` where `Q₁`, `Q₂` are the primal and dual
    /// diagonal blocks; `λ_min(Q₁)` if `Q₁` is not positive definite.
    pub schur: f64,
    /// `PSD_REL_TOL · ‖Q₂‖₂`.
    pub schur_tol: f64,
}

impl LmiMargins {
    pub fn schur_ok(&self) -> bool {
        self.schur >= -self.schur_tol
    }
}

fn check_lmi_inputs(
    cert: &LyapunovCertificate,
    p: &ConstrainedProblem,
    b: &DMatrix<f64>,
    gamma: &DVector<f64>,
) -> Result<()> {
    check_dim("certificate size", cert.p.nrows(), p.n() + p.m())?;
    check_dim("B rows", p.n(), b.nrows())?;
    check_dim("B cols", p.n(), b.ncols())?;
    check_dim("Gamma", p.m(), gamma.len())
}

/// `λ_min(−GᵀP − PG − τP)` for one `(B, Γ)`.
pub fn lmi_check(
    cert: &LyapunovCertificate,
    p: &ConstrainedProblem,
    params: DynamicsParams,
    b: &DMatrix<f64>,
    gamma: &DVector<f64>,
) -> Result<f64> {
    check_lmi_inputs(cert, p, b, gamma)?;
    Ok(sym_lambda_min(&lmi_matrix(cert, p.a(), params, b, gamma)))
}

/// Both margins for one `(B, Γ)`.
///
/// When `c` is large the entries of `P` dwarf the violations that matter,
/// and the eigenvalues of the whole matrix cannot resolve them. The dual
/// block `Q₂` has no `c`-sized entries at vertices with `γⱼ = 1`, so the
/// Schur complement taken block-wise keeps them visible.
pub fn lmi_margins(
    cert: &LyapunovCertificate,
    p: &ConstrainedProblem,
    params: DynamicsParams,
    b: &DMatrix<f64>,
    gamma: &DVector<f64>,
) -> Result<LmiMargins> {
    check_lmi_inputs(cert, p, b, gamma)?;
    Ok(margins_unchecked(cert, p.a(), params, b, gamma))
}

fn margins_unchecked(
    cert: &LyapunovCertificate,
    a: &DMatrix<f64>,
    params: DynamicsParams,
    b: &DMatrix<f64>,
    gamma: &DVector<f64>,
) -> LmiMargins {
    let (m, n) = a.shape();
    let q = lmi_matrix(cert, a, params, b, gamma);
    let full = sym_lambda_min(&q);
    if m == 0 {
        return LmiMargins {
            full,
            schur: f64::INFINITY,
            schur_tol: 0.0,
        };
    }
    let q1 = q.view((0, 0), (n, n)).into_owned();
    let q3 = q.view((0, n), (n, m)).into_owned();
    let q2 = crate::linalg::symmetrize(&q.view((n, n), (m, m)).into_owned());
    let schur_tol = PSD_REL_TOL * sym_norm(&q2);
    let schur = match Cholesky::new(crate::linalg::symmetrize(&q1)) {
        Some(ch) => sym_lambda_min(&(&q2 - q3.transpose() * ch.solve(&q3))),
        None => sym_lambda_min(&q1),
    };
    LmiMargins {
        full,
        schur,
        schur_tol,
    }
}

/// Outcome of [`lmi_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct LmiReport {
    pub samples_checked: usize,
    pub b_samples: usize,
    pub gamma_vertices: usize,
    pub exhaustive_gamma: bool,
    /// Smallest `λ_min(−GᵀP − PG − τP)` over all checks.
    pub min_margin: f64,
    /// `PSD_REL_TOL · ‖P‖₂`.
    pub psd_tol: f64,
    /// `min_margin ≥ −psd_tol`.
    pub pass: bool,
    pub failed_checks: usize,
    pub min_schur_margin: f64,
    /// Every check's Schur margin is within its own tolerance.
    pub schur_pass: bool,
    pub schur_failed_checks: usize,
}

impl LmiReport {
    pub const CSV_HEADER: &'static str = "samples_checked,b_samples,gamma_vertices,exhaustive_gamma,min_margin,psd_tol,pass,failed_checks,min_schur_margin,schur_pass,schur_failed_checks";

    pub fn csv_row(&self) -> String {
        use crate::io::fmt_g17;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.samples_checked,
            self.b_samples,
            self.gamma_vertices,
            self.exhaustive_gamma,
            fmt_g17(self.min_margin),
            fmt_g17(self.psd_tol),
            self.pass,
            self.failed_checks,
            fmt_g17(self.min_schur_margin),
            self.schur_pass,
            self.schur_failed_checks
        )
    }
}

fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `μI + (ℓ − μ)·Q·diag(s)·Qᵀ` with `Q` Haar-orthogonal and `s ∈ [0, 1]^n`.
pub fn random_secant_matrix<R: Rng + ?Sized>(
    n: usize,
    mu: f64,
    ell: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let q = random_orthogonal(n, rng);
    let s = DVector::from_fn(n, |_, _| rng.random::<f64>());
    let mut b = &q * DMatrix::from_diagonal(&s) * q.transpose() * (ell - mu);
    for i in 0..n {
        b[(i, i)] += mu;
    }
    crate::linalg::symmetrize(&b)
}

/// The `B` matrices of a sweep: `μI`, `ℓI`, then `count` random ones, the
/// `k`-th drawn from stream `k + 1` of the seed.
pub fn secant_samples(n: usize, mu: f64, ell: f64, count: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let mut out = vec![DMatrix::identity(n, n) * mu, DMatrix::identity(n, n) * ell];
    out.extend(
        (0..count)
            .map(|k| random_secant_matrix(n, mu, ell, &mut seeded_stream(seed, k as u64 + 1))),
    );
    out
}

/// Vertices of the box `∏ⱼ [0, capⱼ]`: all of them when there are at most
/// [`MAX_EXHAUSTIVE_ROWS`] rows, otherwise both extreme corners plus
/// [`SAMPLED_VERTICES`] random ones (stream 0 of the seed).
pub fn gamma_vertices(caps: &DVector<f64>, seed: u64) -> (Vec<DVector<f64>>, bool) {
    let m = caps.len();
    if m <= MAX_EXHAUSTIVE_ROWS {
        let verts = (0..1usize << m)
            .map(|mask| DVector::from_fn(m, |j, _| if mask >> j & 1 == 1 { caps[j] } else { 0.0 }))
            .collect();
        return (verts, true);
    }
    let mut rng = seeded_stream(seed, 0);
    let mut verts = vec![DVector::zeros(m), caps.clone()];
    verts.extend(
        (0..SAMPLED_VERTICES)
            .map(|_| DVector::from_fn(m, |j, _| if rng.random::<bool>() { caps[j] } else { 0.0 })),
    );
    (verts, false)
}

/// Checks the matrix inequality over the gain vertices (capped by the
/// certificate) and `b_samples` random secant matrices plus `μI` and `ℓI`.
pub fn lmi_sweep(
    cert: &LyapunovCertificate,
    p: &ConstrainedProblem,
    params: DynamicsParams,
    b_samples: usize,
    seed: u64,
) -> Result<LmiReport> {
    lmi_sweep_with(cert, p, params, b_samples, seed, Execution::default())
}

pub fn lmi_sweep_with(
    cert: &LyapunovCertificate,
    p: &ConstrainedProblem,
    params: DynamicsParams,
    b_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<LmiReport> {
    check_dim("certificate size", cert.p.nrows(), p.n() + p.m())?;
    let bs = secant_samples(p.n(), p.mu(), p.ell(), b_samples, seed);
    let (verts, exhaustive) = if cert.variant == CertificateVariant::Equality {
        (vec![DVector::from_element(p.m(), 1.0)], true)
    } else {
        gamma_vertices(&cert.gamma_caps, seed)
    };
    let nv = verts.len();
    let a = p.a();
    let results = exec.map_range(bs.len() * nv, |k| {
        margins_unchecked(cert, a, params, &bs[k / nv], &verts[k % nv])
    });
    let psd_tol = PSD_REL_TOL * cert.lambda_max_p();
    let min_margin = results.iter().map(|r| r.full).fold(f64::INFINITY, nan_min);
    let min_schur_margin = results.iter().map(|r| r.schur).fold(f64::INFINITY, nan_min);
    let failed_checks = results.iter().filter(|r| !(r.full >= -psd_tol)).count();
    let schur_failed_checks = results.iter().filter(|r| !r.schur_ok()).count();
    Ok(LmiReport {
        samples_checked: results.len(),
        b_samples: bs.len(),
        gamma_vertices: nv,
        exhaustive_gamma: exhaustive,
        min_margin,
        psd_tol,
        pass: min_margin >= -psd_tol,
        failed_checks,
        min_schur_margin,
        schur_pass: schur_failed_checks == 0,
        schur_failed_checks,
    })
}

fn nan_min(a: f64, b: f64) -> f64 {
    if a.is_nan() || a < b {
        a
    } else {
        b
    }
}

fn gamma_aat(aat: &DMatrix<f64>, gamma: &DVector<f64>) -> DMatrix<f64> {
    // ΓAAᵀ + AAᵀΓ
    DMatrix::from_fn(aat.nrows(), aat.ncols(), |i, j| {
        (gamma[i] + gamma[j]) * aat[(i, j)]
    })
}

fn dual_block_matrix(
    a: &DMatrix<f64>,
    params: DynamicsParams,
    c: f64,
    gamma: &DVector<f64>,
) -> DMatrix<f64> {
    let DynamicsParams { eta, rho } = params;
    let aat = a * a.transpose();
    let mut q = gamma_aat(&aat, gamma) * eta - &aat * (1.5 * eta);
    for j in 0..gamma.len() {
        q[(j, j)] += 2.0 * eta * c / rho * (1.0 - gamma[j]);
    }
    q
}

/// `λ_min(η(ΓAAᵀ + AAᵀΓ) + (2ηc/ρ)(I − Γ) − (3/2)ηAAᵀ)`, nonnegative for
/// every `Γ ∈ [0, 1]^m` once `c ≥ ρκ₂`.
pub fn dual_block_margin(
    a: &DMatrix<f64>,
    params: DynamicsParams,
    c: f64,
    gamma: &DVector<f64>,
) -> f64 {
    sym_lambda_min(&dual_block_matrix(a, params, c, gamma))
}

/// Sign-equivalent form of [`dual_block_margin`] that stays accurate when
/// `c` is huge: rows with `γⱼ < 1` carry the `c`-sized diagonal and are
/// eliminated by a Schur complement. Returns the smallest eigenvalue of
/// the complement (or of the eliminated block, if that is not positive
/// definite). Its rounding error scales with `ηκ₂` instead of `ηc/ρ`.
pub fn dual_block_schur_margin(
    a: &DMatrix<f64>,
    params: DynamicsParams,
    c: f64,
    gamma: &DVector<f64>,
) -> f64 {
    let q = dual_block_matrix(a, params, c, gamma);
    let small: Vec<usize> = (0..gamma.len()).filter(|&j| gamma[j] >= 1.0).collect();
    let large: Vec<usize> = (0..gamma.len()).filter(|&j| gamma[j] < 1.0).collect();
    if small.is_empty() || large.is_empty() {
        return sym_lambda_min(&q);
    }
    let q11 = q.select_rows(small.iter()).select_columns(small.iter());
    let q12 = q.select_rows(small.iter()).select_columns(large.iter());
    let q22 = q.select_rows(large.iter()).select_columns(large.iter());
    match Cholesky::new(q22.clone()) {
        Some(ch) => sym_lambda_min(&crate::linalg::symmetrize(
            &(q11 - &q12 * ch.solve(&q12.transpose())),
        )),
        None => sym_lambda_min(&q22),
    }
}

/// Minimum of [`dual_block_margin`] over the vertices of `[0, 1]^m`.
pub fn dual_block_min_margin(a: &DMatrix<f64>, params: DynamicsParams, c: f64, seed: u64) -> f64 {
    let (verts, _) = gamma_vertices(&DVector::from_element(a.nrows(), 1.0), seed);
    Execution::default().min_range(verts.len(), |k| dual_block_margin(a, params, c, &verts[k]))
}

/// Minimum of [`dual_block_schur_margin`] over the vertices of `[0, 1]^m`.
pub fn dual_block_min_schur_margin(
    a: &DMatrix<f64>,
    params: DynamicsParams,
    c: f64,
    seed: u64,
) -> f64 {
    let (verts, _) = gamma_vertices(&DVector::from_element(a.nrows(), 1.0), seed);
    Execution::default().min_range(verts.len(), |k| {
        dual_block_schur_margin(a, params, c, &verts[k])
    })
}

/// `λ_min(Q₂) − ηκ₁/2` with `Q₂ = η(ΓAAᵀ + AAᵀΓ) + (2ηc/ρ)(I − Γ) − τcI`,
/// the dual-block bound behind the rank-relaxed certificate.
pub fn rank_dual_block_margin(
    a: &DMatrix<f64>,
    params: DynamicsParams,
    c: f64,
    tau: f64,
    kappa1: f64,
    gamma: &DVector<f64>,
) -> f64 {
    let DynamicsParams { eta, rho } = params;
    let aat = a * a.transpose();
    let mut q = gamma_aat(&aat, gamma) * eta;
    for j in 0..gamma.len() {
        q[(j, j)] += 2.0 * eta * c / rho * (1.0 - gamma[j]) - tau * c;
    }
    sym_lambda_min(&q) - eta * kappa1 / 2.0
}

/// Minimum of [`rank_dual_block_margin`] over the capped gain vertices of a
/// rank-relaxed certificate.
pub fn rank_dual_block_min_margin(
    cert: &LyapunovCertificate,
    a: &DMatrix<f64>,
    params: DynamicsParams,
    kappa1: f64,
    seed: u64,
) -> f64 {
    let (verts, _) = gamma_vertices(&cert.gamma_caps, seed);
    Execution::default().min_range(verts.len(), |k| {
        rank_dual_block_margin(a, params, cert.c, cert.tau, kappa1, &verts[k])
    })
}
