//! Vector fields of the primal-dual gradient dynamics.
//!
//! Three flows are provided, all with the primal time constant fixed to 1:
//!
//! * equality constraints, the plain Lagrangian:
//!   `ẋ = −∇f(x) − Aᵀλ`, `λ̇ = η(Ax − b)`;
//! * one-sided inequalities, the augmented Lagrangian:
//!   `ẋ = −∇f(x) − Σⱼ max(ρ(aⱼᵀx − bⱼ) + λⱼ, 0) aⱼ`,
//!   `λ̇ⱼ = η(max(ρ(aⱼᵀx − bⱼ) + λⱼ, 0) − λⱼ)/ρ`;
//! * two-sided bands `lo ≤ Ax ≤ hi`, where the `max(·, 0)` above is replaced
//!   by the soft threshold `S_{ρ lo}^{ρ hi}(ρ aⱼᵀx + λⱼ)`.
//!
//! The augmented flows are continuous (no projection), and keep `λ ≥ 0` in the
//! one-sided case whenever it starts nonnegative.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::problem::{
    ConstrainedProblem, ConstraintKind, ConstraintSet, DynamicsParams, ObjectiveOracle, RowBound,
};

/// Stacked primal-dual state `z = (x, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl State {
    pub fn new(x: DVector<f64>, lambda: DVector<f64>) -> Self {
        State { x, lambda }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        State {
            x: DVector::zeros(n),
            lambda: DVector::zeros(m),
        }
    }

    pub fn from_slices(x: &[f64], lambda: &[f64]) -> Self {
        State {
            x: DVector::from_column_slice(x),
            lambda: DVector::from_column_slice(lambda),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.len(), self.lambda.len())
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::stacked_norm(&self.x, &self.lambda)
    }

    pub fn distance(&self, other: &State) -> f64 {
        crate::linalg::stacked_norm(&(&self.x - &other.x), &(&self.lambda - &other.lambda))
    }

    /// `z` as one vector `(x, λ)`.
    pub fn stacked(&self) -> DVector<f64> {
        let (n, m) = self.dims();
        let mut z = DVector::zeros(n + m);
        z.rows_mut(0, n).copy_from(&self.x);
        z.rows_mut(n, m).copy_from(&self.lambda);
        z
    }

    pub fn from_stacked(z: &DVector<f64>, n: usize) -> Self {
        let m = z.len() - n;
        State {
            x: z.rows(0, n).into_owned(),
            lambda: z.rows(n, m).into_owned(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.lambda.iter())
            .all(|v| v.is_finite())
    }

    /// `self += h * d`.
    pub fn add_scaled(&mut self, h: f64, d: &StateDerivative) {
        self.x.axpy(h, &d.dx, 1.0);
        self.lambda.axpy(h, &d.dlambda, 1.0);
    }
}

/// Time derivative `(ẋ, λ̇)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dx: DVector<f64>,
    pub dlambda: DVector<f64>,
}

impl StateDerivative {
    pub fn zeros(n: usize, m: usize) -> Self {
        StateDerivative {
            dx: DVector::zeros(n),
            dlambda: DVector::zeros(m),
        }
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::stacked_norm(&self.dx, &self.dlambda)
    }

    pub fn is_finite(&self) -> bool {
        self.dx
            .iter()
            .chain(self.dlambda.iter())
            .all(|v| v.is_finite())
    }
}

/// An autonomous vector field `ż = F(z)` on states of fixed dimensions.
pub trait VectorField: Sync {
    fn dims(&self) -> (usize, usize);
    fn eval_into(&self, s: &State, out: &mut StateDerivative);

    fn eval(&self, s: &State) -> StateDerivative {
        let (n, m) = self.dims();
        let mut out = StateDerivative::zeros(n, m);
        self.eval_into(s, &mut out);
        out
    }

    /// Moves `s` by one explicit Euler step of size `delta`, where `d` is
    /// the field at `s`.
    fn euler_update(&self, s: &mut State, delta: f64, d: &StateDerivative) {
        s.add_scaled(delta, d);
    }
}

/// Closure-backed field, mostly for tests and custom dynamics.
pub struct FnField<F> {
    n: usize,
    m: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&State, &mut StateDerivative) + Sync,
{
    pub fn new(n: usize, m: usize, f: F) -> Self {
        FnField { n, m, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&State, &mut StateDerivative) + Sync,
{
    fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }
    fn eval_into(&self, s: &State, out: &mut StateDerivative) {
        (self.f)(s, out)
    }
}

/// The primal-dual field matching the problem's constraint kind.
#[derive(Debug, Clone, Copy)]
pub struct PdgdField<'a> {
    problem: &'a ConstrainedProblem,
    params: DynamicsParams,
}

impl<'a> PdgdField<'a> {
    pub fn new(problem: &'a ConstrainedProblem, params: DynamicsParams) -> Self {
        PdgdField { problem, params }
    }

    pub fn problem(&self) -> &'a ConstrainedProblem {
        self.problem
    }

    pub fn params(&self) -> DynamicsParams {
        self.params
    }
}

impl VectorField for PdgdField<'_> {
    fn dims(&self) -> (usize, usize) {
        (self.problem.n(), self.problem.m())
    }

    fn eval_into(&self, s: &State, out: &mut StateDerivative) {
        let p = self.problem;
        match p.constraints() {
            ConstraintSet::Equality { a, b } => {
                p.objective().gradient_into(&s.x, &mut out.dx);
                out.dx.gemv_tr(-1.0, a, &s.lambda, -1.0);
                out.dlambda.gemv(self.params.eta, a, &s.x, 0.0);
                out.dlambda.axpy(-self.params.eta, b, 1.0);
            }
            cons => {
                let DynamicsParams { eta, rho } = self.params;
                let a = cons.matrix();
                // dlambda first holds Ax, then the effective multipliers.
                out.dlambda.gemv(1.0, a, &s.x, 0.0);
                for j in 0..out.dlambda.len() {
                    let bound = cons.row_bound(j).expect("penalized constraint");
                    out.dlambda[j] = effective_multiplier(bound, out.dlambda[j], s.lambda[j], rho);
                }
                p.objective().gradient_into(&s.x, &mut out.dx);
                out.dx.gemv_tr(-1.0, a, &out.dlambda, -1.0);
                for j in 0..out.dlambda.len() {
                    out.dlambda[j] = eta * (out.dlambda[j] - s.lambda[j]) / rho;
                }
            }
        }
    }

    /// For the augmented flows the multiplier step is written as
    /// `(1 − h)λ + h·m` with `h = δη/ρ`, so `λ ≥ 0` survives rounding
    /// whenever `h ≤ 1`.
    fn euler_update(&self, s: &mut State, delta: f64, d: &StateDerivative) {
        let cons = self.problem.constraints();
        if cons.kind() == ConstraintKind::Equality {
            s.add_scaled(delta, d);
            return;
        }
        let DynamicsParams { eta, rho } = self.params;
        let h = delta * eta / rho;
        let ax = cons.matrix() * &s.x;
        for j in 0..s.lambda.len() {
            let bound = cons.row_bound(j).expect("penalized constraint");
            let m = effective_multiplier(bound, ax[j], s.lambda[j], rho);
            s.lambda[j] = (1.0 - h) * s.lambda[j] + h * m;
        }
        s.x.axpy(delta, &d.dx, 1.0);
    }
}

fn check_state(p: &ConstrainedProblem, s: &State) -> Result<()> {
    check_dim("state x", p.n(), s.x.len())?;
    check_dim("state lambda", p.m(), s.lambda.len())
}

/// Evaluates the field matching the problem's constraint kind.
pub fn field(p: &ConstrainedProblem, params: DynamicsParams, s: &State) -> Result<StateDerivative> {
    check_state(p, s)?;
    Ok(PdgdField::new(p, params).eval(s))
}

/// Equality-constrained PDGD: `ẋ = −∇f(x) − Aᵀλ`, `λ̇ = η(Ax − b)`.
pub fn pdgd_eq_field(
    p: &ConstrainedProblem,
    params: DynamicsParams,
    s: &State,
) -> Result<StateDerivative> {
    p.expect_kind(ConstraintKind::Equality)?;
    field(p, params, s)
}

/// Augmented-Lagrangian PDGD for `Ax ≤ b`.
pub fn aug_pdgd_field(
    p: &ConstrainedProblem,
    params: DynamicsParams,
    s: &State,
) -> Result<StateDerivative> {
    p.expect_kind(ConstraintKind::Inequality)?;
    field(p, params, s)
}

/// Augmented-Lagrangian PDGD for `lo ≤ Ax ≤ hi`.
pub fn aug_pdgd_ts_field(
    p: &ConstrainedProblem,
    params: DynamicsParams,
    s: &State,
) -> Result<StateDerivative> {
    p.expect_kind(ConstraintKind::TwoSided)?;
    field(p, params, s)
}

/// `max[min(y − lo, 0), y − hi]`: zero on `[lo, hi]`, slope one outside.
pub fn soft_threshold(y: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::InvalidBand { lo, hi });
    }
    Ok(soft_threshold_unchecked(y, lo, hi))
}

#[inline]
pub(crate) fn soft_threshold_unchecked(y: f64, lo: f64, hi: f64) -> f64 {
    (y - lo).min(0.0).max(y - hi)
}

/// Scalar argument fed to the multiplier map of row `j`:
/// `ρ(ax − b) + λ` for one-sided rows, `ρ·ax + λ` for bands.
#[inline]
pub fn multiplier_argument(bound: RowBound, ax: f64, lam: f64, rho: f64) -> f64 {
    match bound {
        RowBound::Upper(b) => rho * (ax - b) + lam,
        RowBound::Band { .. } => rho * ax + lam,
    }
}

/// Applies the multiplier map (`max(·, 0)` or the soft threshold) to an
/// argument produced by [`multiplier_argument`].
#[inline]
pub fn multiplier_map(bound: RowBound, y: f64, rho: f64) -> f64 {
    match bound {
        RowBound::Upper(_) => y.max(0.0),
        RowBound::Band { lo, hi } => soft_threshold_unchecked(y, rho * lo, rho * hi),
    }
}

/// Effective multiplier of a penalized row: `max(ρ(ax − b) + λ, 0)` for
/// `ax ≤ b`, `S_{ρ lo}^{ρ hi}(ρ·ax + λ)` for `lo ≤ ax ≤ hi`. It equals
/// `∂H_ρ/∂(ax)`.
#[inline]
pub fn effective_multiplier(bound: RowBound, ax: f64, lam: f64, rho: f64) -> f64 {
    multiplier_map(bound, multiplier_argument(bound, ax, lam, rho), rho)
}

/// Augmented-Lagrangian penalty `H_ρ` of one row.
///
/// On the branch boundary the active formula is used; both branches agree
/// there in value and gradient.
pub fn penalty_value(bound: RowBound, ax: f64, lam: f64, rho: f64) -> f64 {
    let quad = |r: f64| r * lam + 0.5 * rho * r * r;
    match bound {
        RowBound::Upper(b) => {
            let r = ax - b;
            if rho * r + lam >= 0.0 {
                quad(r)
            } else {
                -lam * lam / (2.0 * rho)
            }
        }
        RowBound::Band { lo, hi } => {
            let y = rho * ax + lam;
            if y < rho * lo {
                quad(ax - lo)
            } else if y > rho * hi {
                quad(ax - hi)
            } else {
                -lam * lam / (2.0 * rho)
            }
        }
    }
}

/// `(∂H_ρ/∂(ax), ∂H_ρ/∂λ) = (m, (m − λ)/ρ)` with `m` the effective multiplier.
pub fn penalty_gradient(bound: RowBound, ax: f64, lam: f64, rho: f64) -> (f64, f64) {
    let m = effective_multiplier(bound, ax, lam, rho);
    (m, (m - lam) / rho)
}

/// Per-row secant slopes `γⱼ ∈ [0, 1]` of the multiplier map between a
/// state and the equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaVector(pub DVector<f64>);

impl GammaVector {
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Difference quotient `(g(y) − g(y*)) / (y − y*)` of a monotone 1-Lipschitz
/// map, set to zero when the denominator is negligible and clamped into
/// `[0, 1]`.
pub fn secant_gamma(g_y: f64, g_ystar: f64, y: f64, ystar: f64) -> f64 {
    let num = g_y - g_ystar;
    let den = y - ystar;
    if den.abs() < 1e-14 * (1.0 + num.abs()) {
        return 0.0;
    }
    (num / den).clamp(0.0, 1.0)
}

/// [`secant_gamma`] for `max(·, 0)`.
pub fn hinge_gamma(y: f64, ystar: f64) -> f64 {
    secant_gamma(y.max(0.0), ystar.max(0.0), y, ystar)
}

/// Secant slopes of each row's multiplier map between `s` and `eq`.
///
/// For equality constraints the multiplier enters linearly, so every slope
/// is one.
pub fn gamma_coefficients(
    p: &ConstrainedProblem,
    params: DynamicsParams,
    s: &State,
    eq: &State,
) -> GammaVector {
    let m = p.m();
    let cons = p.constraints();
    if cons.kind() == ConstraintKind::Equality {
        return GammaVector(DVector::from_element(m, 1.0));
    }
    let a = p.a();
    let ax = a * &s.x;
    let ax_star = a * &eq.x;
    let rho = params.rho;
    GammaVector(DVector::from_iterator(
        m,
        (0..m).map(|j| {
            let bound = cons.row_bound(j).expect("penalized constraint");
            let y = multiplier_argument(bound, ax[j], s.lambda[j], rho);
            let ys = multiplier_argument(bound, ax_star[j], eq.lambda[j], rho);
            secant_gamma(
                multiplier_map(bound, y, rho),
                multiplier_map(bound, ys, rho),
                y,
                ys,
            )
        }),
    ))
}
