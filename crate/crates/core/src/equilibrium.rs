//! Equilibria of the primal-dual flows, which are exactly the KKT points of
//! the underlying problem.
//!
//! Equality constraints are solved by Newton's method on the stacked KKT
//! map (one linear solve for quadratics). The augmented flows are
//! integrated until the KKT residual is small, then polished by a Newton
//! solve restricted to the active rows.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{PdgdField, State};
use crate::error::{Error, Result};
use crate::integrator::{practical_step, Rk4, DIVERGENCE_NORM};
use crate::problem::{
    ConstrainedProblem, ConstraintSet, DynamicsParams, ObjectiveOracle, RowBound,
};

/// Rows with `|aⱼᵀx − bound| ≤ ACT_TOL` count as active.
pub const ACT_TOL: f64 = 1e-7;

/// Default total-residual tolerance of [`solve_equilibrium`].
pub const DEFAULT_TOL: f64 = 1e-9;

/// Integration budget (steps) for the augmented flows.
pub const STEP_BUDGET: usize = 10_000_000;

const NEWTON_MAX_ITER: usize = 50;

/// Residuals of the KKT system at a state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResidual {
    /// `‖∇f(x) + Aᵀλ‖`.
    pub stationarity: f64,
    /// Norm of the constraint violation.
    pub primal: f64,
    /// `‖min(λ, 0)‖` (one-sided inequalities only).
    pub dual: f64,
    /// Largest `|multiplier · slack|` over the rows.
    pub complementarity: f64,
}

impl KktResidual {
    pub fn total(&self) -> f64 {
        self.stationarity + self.primal + self.dual + self.complementarity
    }
}

/// KKT residuals of `s`. For two-sided bands the multiplier is split into
/// `λ̄ = max(λ, 0)` for the upper bound and `λ̲ = −min(λ, 0)` for the lower
/// bound.
pub fn kkt_residual(p: &ConstrainedProblem, s: &State) -> KktResidual {
    let a = p.a();
    let stationarity = (p.objective().gradient(&s.x) + a.transpose() * &s.lambda).norm();
    let ax = a * &s.x;
    match p.constraints() {
        ConstraintSet::Equality { b, .. } => KktResidual {
            stationarity,
            primal: (ax - b).norm(),
            ..Default::default()
        },
        ConstraintSet::Inequality { b, .. } => {
            let r = ax - b;
            KktResidual {
                stationarity,
                primal: r.map(|v| v.max(0.0)).norm(),
                dual: s.lambda.map(|v| v.min(0.0)).norm(),
                complementarity: r
                    .iter()
                    .zip(s.lambda.iter())
                    .map(|(r, l)| (r * l).abs())
                    .fold(0.0, f64::max),
            }
        }
        ConstraintSet::TwoSided { lo, hi, .. } => {
            let mut viol = 0.0;
            let mut comp: f64 = 0.0;
            for j in 0..ax.len() {
                let (up, down) = split_multiplier(s.lambda[j]);
                viol += (ax[j] - hi[j]).max(0.0).powi(2) + (lo[j] - ax[j]).max(0.0).powi(2);
                comp = comp
                    .max((up * (ax[j] - hi[j])).abs())
                    .max((down * (lo[j] - ax[j])).abs());
            }
            KktResidual {
                stationarity,
                primal: viol.sqrt(),
                dual: 0.0,
                complementarity: comp,
            }
        }
    }
}

/// `(max(λ, 0), −min(λ, 0))`: the upper- and lower-bound multipliers of a
/// two-sided row.
pub fn split_multiplier(lam: f64) -> (f64, f64) {
    (lam.max(0.0), (-lam).max(0.0))
}

/// Rows active at `x`: `|aⱼᵀx − bⱼ| ≤ ACT_TOL` (either bound for bands, all
/// rows for equalities).
pub fn active_set(p: &ConstrainedProblem, x: &DVector<f64>) -> Vec<usize> {
    let ax = p.a() * x;
    (0..p.m())
        .filter(|&j| match p.constraints().row_bound(j) {
            None => true,
            Some(RowBound::Upper(b)) => (ax[j] - b).abs() <= ACT_TOL,
            Some(RowBound::Band { lo, hi }) => {
                (ax[j] - hi).abs() <= ACT_TOL || (ax[j] - lo).abs() <= ACT_TOL
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub x_star: DVector<f64>,
    pub lambda_star: DVector<f64>,
    pub residual: KktResidual,
    pub active_set: Vec<usize>,
}

impl Equilibrium {
    pub fn state(&self) -> State {
        State::new(self.x_star.clone(), self.lambda_star.clone())
    }
}

/// Equilibrium from the origin with total KKT residual at most `tol`.
pub fn solve_equilibrium(
    p: &ConstrainedProblem,
    params: DynamicsParams,
    tol: f64,
) -> Result<Equilibrium> {
    solve_equilibrium_from(p, params, tol, &State::zeros(p.n(), p.m()))
}

/// Equilibrium reached from `start`.
pub fn solve_equilibrium_from(
    p: &ConstrainedProblem,
    params: DynamicsParams,
    tol: f64,
    start: &State,
) -> Result<Equilibrium> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    crate::error::check_dim("start x", p.n(), start.x.len())?;
    crate::error::check_dim("start lambda", p.m(), start.lambda.len())?;
    if let ConstraintSet::Equality { b, .. } = p.constraints() {
        let rows: Vec<usize> = (0..p.m()).collect();
        if let Some(s) = newton_kkt(p, &rows, b, start, tol) {
            return Ok(finish(p, s));
        }
    }
    integrate_to_equilibrium(p, params, tol, start)
}

fn finish(p: &ConstrainedProblem, s: State) -> Equilibrium {
    Equilibrium {
        residual: kkt_residual(p, &s),
        active_set: active_set(p, &s.x),
        x_star: s.x,
        lambda_star: s.lambda,
    }
}

/// Newton's method on `∇f(x) + A_Sᵀν = 0`, `A_S x = t` for the rows `S`,
/// with full steps. Returns the state with `λ_S = ν` and zeros elsewhere
/// once its KKT residual is at most `tol`.
fn newton_kkt(
    p: &ConstrainedProblem,
    rows: &[usize],
    targets: &DVector<f64>,
    start: &State,
    tol: f64,
) -> Option<State> {
    let (n, k) = (p.n(), rows.len());
    let a_s = p.a().select_rows(rows.iter());
    let t = DVector::from_fn(k, |i, _| targets[rows[i]]);
    let mut x = start.x.clone();
    let mut nu = DVector::from_fn(k, |i, _| start.lambda[rows[i]]);
    let assemble = |x: &DVector<f64>, nu: &DVector<f64>| {
        let mut lam = DVector::zeros(p.m());
        for (i, &j) in rows.iter().enumerate() {
            lam[j] = nu[i];
        }
        State::new(x.clone(), lam)
    };
    for _ in 0..NEWTON_MAX_ITER {
        let s = assemble(&x, &nu);
        if kkt_residual(p, &s).total() <= tol {
            return Some(s);
        }
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n)
            .copy_from(&-(p.objective().gradient(&x) + a_s.transpose() * &nu));
        rhs.rows_mut(n, k).copy_from(&-(&a_s * &x - &t));
        let mut jac = DMatrix::zeros(n + k, n + k);
        jac.view_mut((0, 0), (n, n))
            .copy_from(&p.objective().hessian(&x));
        jac.view_mut((0, n), (n, k)).copy_from(&a_s.transpose());
        jac.view_mut((n, 0), (k, n)).copy_from(&a_s);
        let step = jac.lu().solve(&rhs)?;
        if !step.iter().all(|v| v.is_finite()) {
            return None;
        }
        x += step.rows(0, n);
        nu += step.rows(n, k);
    }
    let s = assemble(&x, &nu);
    (kkt_residual(p, &s).total() <= tol).then_some(s)
}

/// Newton polish on the rows active at `s`, each pinned to the bound it
/// sits at.
fn polish(p: &ConstrainedProblem, s: &State, tol: f64) -> Option<State> {
    let ax = p.a() * &s.x;
    let mut rows = Vec::new();
    let mut targets = DVector::zeros(p.m());
    for j in 0..p.m() {
        let pin = match p.constraints().row_bound(j)? {
            RowBound::Upper(b) => {
                ((ax[j] - b).abs() <= 1e3 * ACT_TOL || s.lambda[j] > 1e3 * ACT_TOL).then_some(b)
            }
            RowBound::Band { lo, hi } => {
                if (ax[j] - hi).abs() <= 1e3 * ACT_TOL || s.lambda[j] > 1e3 * ACT_TOL {
                    Some(hi)
                } else if (ax[j] - lo).abs() <= 1e3 * ACT_TOL || s.lambda[j] < -1e3 * ACT_TOL {
                    Some(lo)
                } else {
                    None
                }
            }
        };
        if let Some(t) = pin {
            rows.push(j);
            targets[j] = t;
        }
    }
    newton_kkt(p, &rows, &targets, s, tol)
}

/// Runs the flow with fourth-order Runge-Kutta steps from `start` until the
/// KKT residual drops below `tol`, polishing on the active rows whenever it
/// is already small. The step starts at [`practical_step`] and is halved
/// on divergence.
fn integrate_to_equilibrium(
    p: &ConstrainedProblem,
    params: DynamicsParams,
    tol: f64,
    start: &State,
) -> Result<Equilibrium> {
    const CHECK_EVERY: usize = 200;
    let field = PdgdField::new(p, params);
    let mut h = practical_step(p, params);
    let mut rk = Rk4::new(p.n(), p.m());
    let mut last_residual = f64::INFINITY;
    'restart: for _ in 0..8 {
        let mut s = start.clone();
        let mut steps = 0;
        while steps < STEP_BUDGET {
            for _ in 0..CHECK_EVERY {
                if !rk.step(&field, &mut s, h) || !(s.norm() <= DIVERGENCE_NORM) {
                    h /= 2.0;
                    continue 'restart;
                }
            }
            steps += CHECK_EVERY;
            last_residual = kkt_residual(p, &s).total();
            if last_residual <= tol {
                return Ok(finish(p, s));
            }
            if last_residual <= 1e-3 {
                if let Some(polished) = polish(p, &s, tol) {
                    return Ok(finish(p, polished));
                }
            }
        }
        return Err(Error::MaxIterations {
            iterations: steps,
            residual: last_residual,
        });
    }
    Err(Error::MaxIterations {
        iterations: STEP_BUDGET,
        residual: last_residual,
    })
}
