//! Constrained problems `min f(x)` subject to affine constraints, together
//! with the regularity constants the certificates are built from.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{gaussian_vector, max_asymmetry, sym_eig_extremes};
use crate::parallel::Execution;

/// Relative tolerance for the rank test on `AA^T`.
pub const RANK_REL_TOL: f64 = 1e-10;

/// A smooth, strongly convex objective with declared moduli `mu <= ell`.
///
/// Implementations must be pure and reentrant.
pub trait ObjectiveOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>);
    /// Strong-convexity modulus.
    fn mu(&self) -> f64;
    /// Smoothness modulus.
    fn ell(&self) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        self.gradient_into(x, &mut g);
        g
    }

    /// Hessian at `x`. The default is a central difference of the gradient;
    /// it is only used by the Newton equilibrium solver.
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        let mut xp = x.clone();
        let mut gp = DVector::zeros(n);
        let mut gm = DVector::zeros(n);
        for j in 0..n {
            let step = 1e-6 * (1.0 + x[j].abs());
            xp[j] = x[j] + step;
            self.gradient_into(&xp, &mut gp);
            xp[j] = x[j] - step;
            self.gradient_into(&xp, &mut gm);
            xp[j] = x[j];
            h.set_column(j, &((&gp - &gm) / (2.0 * step)));
        }
        crate::linalg::symmetrize(&h)
    }
}

/// `f(x) = ½ xᵀWx + cᵀx`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    w: DMatrix<f64>,
    linear: DVector<f64>,
    mu: f64,
    ell: f64,
}

impl Quadratic {
    /// Builds the objective with `mu`, `ell` taken from the spectrum of `W`.
    pub fn new(w: DMatrix<f64>, linear: DVector<f64>) -> Result<Self> {
        check_square_symmetric(&w)?;
        check_dim("quadratic linear term", w.nrows(), linear.len())?;
        let (mu, ell) = sym_eig_extremes(&w);
        if mu <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "W must be positive definite (lambda_min = {mu:e})"
            )));
        }
        Ok(Quadratic { w, linear, mu, ell })
    }

    /// Builds the objective with declared constants (not checked; see
    /// [`validate_problem`]).
    pub fn with_constants(
        w: DMatrix<f64>,
        linear: DVector<f64>,
        mu: f64,
        ell: f64,
    ) -> Result<Self> {
        check_square_symmetric(&w)?;
        check_dim("quadratic linear term", w.nrows(), linear.len())?;
        check_moduli(mu, ell)?;
        Ok(Quadratic { w, linear, mu, ell })
    }

    /// `½‖x‖²` in dimension `n` (`mu = ell = 1`).
    pub fn identity(n: usize) -> Self {
        Quadratic {
            w: DMatrix::identity(n, n),
            linear: DVector::zeros(n),
            mu: 1.0,
            ell: 1.0,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }
}

impl ObjectiveOracle for Quadratic {
    fn dim(&self) -> usize {
        self.w.nrows()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.w * x)) + self.linear.dot(x)
    }

    fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        out.gemv(1.0, &self.w, x, 0.0);
        *out += &self.linear;
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn ell(&self) -> f64 {
        self.ell
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.w.clone()
    }
}

/// Ridge-regularized logistic loss
/// `Σᵢ log(1 + exp(−yᵢ dᵢᵀx)) + (reg/2)‖x‖²` with labels `yᵢ ∈ {±1}`.
///
/// `mu = reg`; `ell = reg + ¼ λ_max(DᵀD)` since the logistic Hessian is
/// bounded by `¼ DᵀD`.
#[derive(Debug, Clone)]
pub struct LogisticRidge {
    features: DMatrix<f64>,
    labels: DVector<f64>,
    reg: f64,
    ell: f64,
}

impl LogisticRidge {
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>, reg: f64) -> Result<Self> {
        check_dim("logistic labels", features.nrows(), labels.len())?;
        if !(reg > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reg must be positive, got {reg}"
            )));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
        }
        let gram = features.transpose() * &features;
        let top = if gram.nrows() == 0 {
            0.0
        } else {
            sym_eig_extremes(&gram).1.max(0.0)
        };
        Ok(LogisticRidge {
            ell: reg + 0.25 * top,
            features,
            labels,
            reg,
        })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    fn margins(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.features * x).component_mul(&self.labels)
    }
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl ObjectiveOracle for LogisticRidge {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let loss: f64 = self.margins(x).iter().map(|&s| softplus(-s)).sum();
        loss + 0.5 * self.reg * x.norm_squared()
    }

    fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        // d/dx log(1 + exp(-s)) = -sigmoid(-s) * y_i d_i
        let weights = self
            .margins(x)
            .zip_map(&self.labels, |s, y| -y * sigmoid(-s));
        out.gemv_tr(1.0, &self.features, &weights, 0.0);
        out.axpy(self.reg, x, 1.0);
    }

    fn mu(&self) -> f64 {
        self.reg
    }

    fn ell(&self) -> f64 {
        self.ell
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let curv = self.margins(x).map(|s| {
            let p = sigmoid(s);
            p * (1.0 - p)
        });
        let mut scaled = self.features.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= curv[i];
        }
        let mut h = self.features.transpose() * scaled;
        for i in 0..h.nrows() {
            h[(i, i)] += self.reg;
        }
        h
    }
}

/// Objective given by closures, for user-supplied problems.
pub struct FnObjective<F, G> {
    dim: usize,
    value: F,
    gradient: G,
    mu: f64,
    ell: f64,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&DVector<f64>) -> f64 + Send + Sync,
    G: Fn(&DVector<f64>, &mut DVector<f64>) + Send + Sync,
{
    pub fn new(dim: usize, value: F, gradient: G, mu: f64, ell: f64) -> Result<Self> {
        check_moduli(mu, ell)?;
        Ok(FnObjective {
            dim,
            value,
            gradient,
            mu,
            ell,
        })
    }
}

impl<F, G> fmt::Debug for FnObjective<F, G> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObjective")
            .field("dim", &self.dim)
            .field("mu", &self.mu)
            .field("ell", &self.ell)
            .finish_non_exhaustive()
    }
}

impl<F, G> ObjectiveOracle for FnObjective<F, G>
where
    F: Fn(&DVector<f64>) -> f64 + Send + Sync,
    G: Fn(&DVector<f64>, &mut DVector<f64>) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }
    fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        (self.gradient)(x, out)
    }
    fn mu(&self) -> f64 {
        self.mu
    }
    fn ell(&self) -> f64 {
        self.ell
    }
}

/// The objectives the crate knows how to generate, serialize and analyze,
/// plus an escape hatch for anything else.
#[derive(Debug, Clone)]
pub enum Objective {
    Quadratic(Quadratic),
    Logistic(LogisticRidge),
    Custom(Arc<dyn ObjectiveOracle>),
}

impl Objective {
    pub fn as_quadratic(&self) -> Option<&Quadratic> {
        match self {
            Objective::Quadratic(q) => Some(q),
            _ => None,
        }
    }

    fn inner(&self) -> &dyn ObjectiveOracle {
        match self {
            Objective::Quadratic(q) => q,
            Objective::Logistic(l) => l,
            Objective::Custom(c) => c.as_ref(),
        }
    }
}

impl From<Quadratic> for Objective {
    fn from(q: Quadratic) -> Self {
        Objective::Quadratic(q)
    }
}

impl From<LogisticRidge> for Objective {
    fn from(l: LogisticRidge) -> Self {
        Objective::Logistic(l)
    }
}

impl ObjectiveOracle for Objective {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.inner().value(x)
    }
    fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        self.inner().gradient_into(x, out)
    }
    fn mu(&self) -> f64 {
        self.inner().mu()
    }
    fn ell(&self) -> f64 {
        self.inner().ell()
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.inner().hessian(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    Equality,
    Inequality,
    TwoSided,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintKind::Equality => "equality",
            ConstraintKind::Inequality => "inequality",
            ConstraintKind::TwoSided => "two-sided",
        })
    }
}

/// Bound attached to a single row `a_jᵀx` of a penalized constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowBound {
    /// `a_jᵀx <= b`
    Upper(f64),
    /// `lo <= a_jᵀx <= hi`
    Band { lo: f64, hi: f64 },
}

/// Affine constraints `Ax = b`, `Ax <= b` or `lo <= Ax <= hi`.
#[derive(Debug, Clone)]
pub enum ConstraintSet {
    Equality {
        a: DMatrix<f64>,
        b: DVector<f64>,
    },
    Inequality {
        a: DMatrix<f64>,
        b: DVector<f64>,
    },
    TwoSided {
        a: DMatrix<f64>,
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
}

impl ConstraintSet {
    pub fn kind(&self) -> ConstraintKind {
        match self {
            ConstraintSet::Equality { .. } => ConstraintKind::Equality,
            ConstraintSet::Inequality { .. } => ConstraintKind::Inequality,
            ConstraintSet::TwoSided { .. } => ConstraintKind::TwoSided,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        match self {
            ConstraintSet::Equality { a, .. }
            | ConstraintSet::Inequality { a, .. }
            | ConstraintSet::TwoSided { a, .. } => a,
        }
    }

    /// Per-row bound for the penalized variants; `None` for equalities.
    pub fn row_bound(&self, j: usize) -> Option<RowBound> {
        match self {
            ConstraintSet::Equality { .. } => None,
            ConstraintSet::Inequality { b, .. } => Some(RowBound::Upper(b[j])),
            ConstraintSet::TwoSided { lo, hi, .. } => Some(RowBound::Band {
                lo: lo[j],
                hi: hi[j],
            }),
        }
    }

    fn check(&self) -> Result<()> {
        let m = self.matrix().nrows();
        match self {
            ConstraintSet::Equality { b, .. } | ConstraintSet::Inequality { b, .. } => {
                check_dim("constraint right-hand side", m, b.len())
            }
            ConstraintSet::TwoSided { lo, hi, .. } => {
                check_dim("lower bounds", m, lo.len())?;
                check_dim("upper bounds", m, hi.len())?;
                for j in 0..m {
                    if !(lo[j] < hi[j]) {
                        return Err(Error::InvalidBand {
                            lo: lo[j],
                            hi: hi[j],
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

/// `κ₁ I ⪯ AAᵀ ⪯ κ₂ I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub kappa1: f64,
    pub kappa2: f64,
}

/// Extreme eigenvalues of `AAᵀ`; fails when `A` is (numerically) rank
/// deficient.
pub fn spectral_bounds(a: &DMatrix<f64>) -> Result<SpectralBounds> {
    let (lo, hi) = aat_extremes(a)?;
    let tol = RANK_REL_TOL * hi;
    if lo <= tol {
        return Err(Error::RankDeficient {
            lambda_min: lo,
            tol,
        });
    }
    Ok(SpectralBounds {
        kappa1: lo,
        kappa2: hi,
    })
}

pub(crate) fn aat_extremes(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidParameter("constraint matrix is empty".into()));
    }
    Ok(sym_eig_extremes(&(a * a.transpose())))
}

/// Dual time constant `eta` and penalty weight `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsParams {
    pub eta: f64,
    pub rho: f64,
}

impl DynamicsParams {
    pub fn new(eta: f64, rho: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta must be positive, got {eta}"
            )));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rho must be positive, got {rho}"
            )));
        }
        Ok(DynamicsParams { eta, rho })
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedProblem {
    objective: Objective,
    constraints: ConstraintSet,
    bounds: SpectralBounds,
}

impl ConstrainedProblem {
    /// Builds a problem, computing `κ₁, κ₂` from `AAᵀ`.
    pub fn new(objective: impl Into<Objective>, constraints: ConstraintSet) -> Result<Self> {
        let bounds = spectral_bounds(constraints.matrix())?;
        Self::with_bounds(objective, constraints, bounds)
    }

    /// Builds a problem with declared spectral bounds. Dimensions are
    /// checked; the constants are not.
    pub fn with_bounds(
        objective: impl Into<Objective>,
        constraints: ConstraintSet,
        bounds: SpectralBounds,
    ) -> Result<Self> {
        let objective = objective.into();
        constraints.check()?;
        check_dim(
            "constraint columns",
            objective.dim(),
            constraints.matrix().ncols(),
        )?;
        if !(bounds.kappa1 > 0.0 && bounds.kappa1 <= bounds.kappa2) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < kappa1 <= kappa2, got ({}, {})",
                bounds.kappa1, bounds.kappa2
            )));
        }
        Ok(ConstrainedProblem {
            objective,
            constraints,
            bounds,
        })
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }
    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }
    pub fn kind(&self) -> ConstraintKind {
        self.constraints.kind()
    }
    pub fn a(&self) -> &DMatrix<f64> {
        self.constraints.matrix()
    }
    pub fn bounds(&self) -> SpectralBounds {
        self.bounds
    }
    pub fn n(&self) -> usize {
        self.objective.dim()
    }
    pub fn m(&self) -> usize {
        self.a().nrows()
    }
    pub fn mu(&self) -> f64 {
        self.objective.mu()
    }
    pub fn ell(&self) -> f64 {
        self.objective.ell()
    }

    pub(crate) fn expect_kind(&self, expected: ConstraintKind) -> Result<()> {
        if self.kind() == expected {
            Ok(())
        } else {
            Err(Error::WrongConstraintKind {
                expected,
                found: self.kind(),
            })
        }
    }
}

/// `⟨∇f(x) − ∇f(y), x − y⟩ / ‖x − y‖²`, the quantity bracketed by
/// `[mu, ell]` under strong convexity and smoothness. NaN when `x == y`.
pub fn secant_ratio(f: &dyn ObjectiveOracle, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let d = x - y;
    let dd = d.norm_squared();
    if dd == 0.0 {
        return f64::NAN;
    }
    (f.gradient(x) - f.gradient(y)).dot(&d) / dd
}

/// Outcome of [`validate_problem`]. Violations are reported, not raised.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub samples: usize,
    pub secant_pass_rate: f64,
    pub min_secant_ratio: f64,
    pub max_secant_ratio: f64,
    pub measured_kappa1: f64,
    pub measured_kappa2: f64,
    pub dims_ok: bool,
    pub rank_ok: bool,
    pub kappa_ok: bool,
    pub pass: bool,
}

/// Relative slack allowed when comparing declared and measured constants.
const VALIDATION_REL_TOL: f64 = 1e-9;

/// Spot-checks the declared constants of `p` on `samples` random pairs and
/// against the spectrum of `AAᵀ`.
pub fn validate_problem(p: &ConstrainedProblem, samples: usize, seed: u64) -> ValidationReport {
    let n = p.n();
    let samples = samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(DVector<f64>, DVector<f64>)> = (0..samples)
        .map(|_| {
            let x = gaussian_vector(n, &mut rng) * 3.0;
            let y = gaussian_vector(n, &mut rng) * 3.0;
            (x, y)
        })
        .collect();
    let f = p.objective();
    let ratios = Execution::default().map(&pairs, |(x, y)| secant_ratio(f, x, y));

    let (mu, ell) = (f.mu(), f.ell());
    let lo = mu * (1.0 - VALIDATION_REL_TOL) - 1e-12;
    let hi = ell * (1.0 + VALIDATION_REL_TOL) + 1e-12;
    let passing = ratios.iter().filter(|&&r| r >= lo && r <= hi).count();
    let min_r = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_r = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let a = p.a();
    let dims_ok = a.ncols() == n && a.nrows() > 0 && p.constraints().check().is_ok();
    let (k1, k2) = aat_extremes(a).unwrap_or((0.0, 0.0));
    let rank_ok = k1 > RANK_REL_TOL * k2;
    let declared = p.bounds();
    let kappa_ok = declared.kappa1 <= k1 * (1.0 + VALIDATION_REL_TOL)
        && declared.kappa2 >= k2 * (1.0 - VALIDATION_REL_TOL);
    let secant_pass_rate = passing as f64 / samples as f64;

    ValidationReport {
        samples,
        secant_pass_rate,
        min_secant_ratio: min_r,
        max_secant_ratio: max_r,
        measured_kappa1: k1,
        measured_kappa2: k2,
        dims_ok,
        rank_ok,
        kappa_ok,
        pass: dims_ok && rank_ok && kappa_ok && passing == samples,
    }
}

fn check_square_symmetric(w: &DMatrix<f64>) -> Result<()> {
    if !w.is_square() {
        return Err(Error::DimensionMismatch {
            what: "quadratic matrix columns",
            expected: w.nrows(),
            found: w.ncols(),
        });
    }
    let asym = max_asymmetry(w);
    if asym > 1e-12 * (1.0 + w.amax()) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

fn check_moduli(mu: f64, ell: f64) -> Result<()> {
    if !(mu > 0.0 && mu <= ell && ell.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < mu <= ell, got mu = {mu}, ell = {ell}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn spectral_bounds_examples() {
        let b = spectral_bounds(&DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(b.kappa1, 1.0, epsilon = 1e-14);
        assert_relative_eq!(b.kappa2, 1.0, epsilon = 1e-14);

        // AAᵀ = [2]
        let b = spectral_bounds(&mat(1, 2, &[1.0, 1.0])).unwrap();
        assert_relative_eq!(b.kappa1, 2.0, epsilon = 1e-14);
        assert_relative_eq!(b.kappa2, 2.0, epsilon = 1e-14);

        // AAᵀ = diag(1, 4)
        let b = spectral_bounds(&mat(2, 2, &[1.0, 0.0, 0.0, 2.0])).unwrap();
        assert_relative_eq!(b.kappa1, 1.0, epsilon = 1e-14);
        assert_relative_eq!(b.kappa2, 4.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_deficient_rejected() {
        let err = spectral_bounds(&mat(2, 2, &[1.0, 1.0, 2.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
        let cons = ConstraintSet::Equality {
            a: mat(2, 2, &[1.0, 1.0, 2.0, 2.0]),
            b: DVector::zeros(2),
        };
        assert!(matches!(
            ConstrainedProblem::new(Quadratic::identity(2), cons),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn validate_exact_quadratic_passes() {
        let p = ConstrainedProblem::new(
            Quadratic::identity(2),
            ConstraintSet::Equality {
                a: DMatrix::identity(2, 2),
                b: DVector::zeros(2),
            },
        )
        .unwrap();
        let r = validate_problem(&p, 50, 1);
        assert!(r.pass, "{r:?}");
        assert_eq!(r.secant_pass_rate, 1.0);
    }

    #[test]
    fn validate_overstated_mu_fails() {
        // ½‖x‖² has secant ratio exactly 1 < 2.
        let f = Quadratic::with_constants(DMatrix::identity(2, 2), DVector::zeros(2), 2.0, 2.0)
            .unwrap();
        let p = ConstrainedProblem::new(
            f,
            ConstraintSet::Equality {
                a: DMatrix::identity(2, 2),
                b: DVector::zeros(2),
            },
        )
        .unwrap();
        let r = validate_problem(&p, 20, 1);
        assert!(!r.pass);
        assert_eq!(r.secant_pass_rate, 0.0);
        assert_relative_eq!(r.max_secant_ratio, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn validate_rank_deficient_fails() {
        let p = ConstrainedProblem::with_bounds(
            Quadratic::identity(2),
            ConstraintSet::Equality {
                a: mat(2, 2, &[1.0, 1.0, 2.0, 2.0]),
                b: DVector::zeros(2),
            },
            SpectralBounds {
                kappa1: 1.0,
                kappa2: 10.0,
            },
        )
        .unwrap();
        let r = validate_problem(&p, 10, 0);
        assert!(!r.rank_ok);
        assert!(!r.pass);
    }

    #[test]
    fn two_sided_band_checked() {
        let cons = ConstraintSet::TwoSided {
            a: DMatrix::identity(1, 1),
            lo: DVector::from_element(1, 1.0),
            hi: DVector::from_element(1, 1.0),
        };
        assert!(matches!(
            ConstrainedProblem::new(Quadratic::identity(1), cons),
            Err(Error::InvalidBand { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let cons = ConstraintSet::Inequality {
            a: DMatrix::identity(2, 3),
            b: DVector::zeros(2),
        };
        assert!(matches!(
            ConstrainedProblem::new(Quadratic::identity(2), cons),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let d = mat(3, 2, &[1.0, -0.5, 0.3, 2.0, -1.2, 0.7]);
        let y = DVector::from_vec(vec![1.0, -1.0, 1.0]);
        let f = LogisticRidge::new(d, y, 0.1).unwrap();
        let x = DVector::from_vec(vec![0.4, -0.9]);
        let g = f.gradient(&x);
        for j in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += 1e-6;
            xm[j] -= 1e-6;
            let fd = (f.value(&xp) - f.value(&xm)) / 2e-6;
            assert_relative_eq!(g[j], fd, max_relative = 1e-6);
        }
        let h = f.hessian(&x);
        let h_fd = crate::problem::ObjectiveOracle::hessian(
            &FnObjective::new(
                2,
                |x: &DVector<f64>| f.value(x),
                |x: &DVector<f64>, out: &mut DVector<f64>| f.gradient_into(x, out),
                0.1,
                f.ell(),
            )
            .unwrap(),
            &x,
        );
        assert!((h - h_fd).amax() < 1e-6);
    }

    #[test]
    fn logistic_at_zero_is_n_log2() {
        let d = mat(4, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let y = DVector::from_vec(vec![1.0, -1.0, -1.0, 1.0]);
        let f = LogisticRidge::new(d, y, 0.5).unwrap();
        assert_relative_eq!(
            f.value(&DVector::zeros(2)),
            4.0 * 2f64.ln(),
            epsilon = 1e-14
        );
    }
}
