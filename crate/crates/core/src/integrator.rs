//! Explicit Euler integration, trajectory recording, and the step-size test
//! for the Euler discretization.
//!
//! For a flow with Lyapunov function `V = ‖z − z*‖²_P` decaying at rate `τ`,
//! the Euler iterates with step `δ` contract in the `P`-norm by at least
//!
//! ```text
//! r(δ) = e^{−τδ/2} + κ_P ν² δ² / 2
//! ```
//!
//! per step, where `ν` is a Lipschitz constant of the field and `κ_P` the
//! condition number of `P`. A classical fourth-order Runge-Kutta step is
//! also provided as an uncertified high-accuracy reference.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::Path;

use crate::certificates::LyapunovCertificate;
use crate::dynamics::{State, StateDerivative, VectorField};
use crate::error::{Error, Result};
use crate::io::fmt_g17;
use crate::problem::{ConstrainedProblem, ConstraintKind, DynamicsParams};

/// State norm past which a trajectory is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "step size must be positive, got {delta}"
        )))
    }
}

/// One explicit Euler step `s + δ·F(s)`.
pub fn euler_step<F: VectorField + ?Sized>(field: &F, s: &State, delta: f64) -> Result<State> {
    check_delta(delta)?;
    let d = field.eval(s);
    if !d.is_finite() {
        return Err(Error::NonFiniteField { step: 0 });
    }
    let mut next = s.clone();
    field.euler_update(&mut next, delta, &d);
    Ok(next)
}

/// Reusable buffers for classical fourth-order Runge-Kutta steps.
pub struct Rk4 {
    k: [StateDerivative; 4],
    tmp: State,
}

impl Rk4 {
    pub fn new(n: usize, m: usize) -> Self {
        Rk4 {
            k: std::array::from_fn(|_| StateDerivative::zeros(n, m)),
            tmp: State::zeros(n, m),
        }
    }

    /// Advances `s` by `h` in place; returns `false` if a stage was not
    /// finite.
    pub fn step<F: VectorField + ?Sized>(&mut self, field: &F, s: &mut State, h: f64) -> bool {
        let [k1, k2, k3, k4] = &mut self.k;
        field.eval_into(s, k1);
        self.tmp.clone_from(s);
        self.tmp.add_scaled(0.5 * h, k1);
        field.eval_into(&self.tmp, k2);
        self.tmp.clone_from(s);
        self.tmp.add_scaled(0.5 * h, k2);
        field.eval_into(&self.tmp, k3);
        self.tmp.clone_from(s);
        self.tmp.add_scaled(h, k3);
        field.eval_into(&self.tmp, k4);
        s.add_scaled(h / 6.0, k1);
        s.add_scaled(h / 3.0, k2);
        s.add_scaled(h / 3.0, k3);
        s.add_scaled(h / 6.0, k4);
        s.is_finite()
    }
}

/// One fourth-order Runge-Kutta step (not covered by any certificate).
pub fn rk4_step<F: VectorField + ?Sized>(field: &F, s: &State, h: f64) -> Result<State> {
    check_delta(h)?;
    let (n, m) = s.dims();
    let mut next = s.clone();
    if !Rk4::new(n, m).step(field, &mut next, h) {
        return Err(Error::NonFiniteField { step: 0 });
    }
    Ok(next)
}

/// Runs `steps` Euler steps from `z0`, calling `observer(k, state)` for
/// `k = 0..=steps`. The observer can stop the run early. Returns the last
/// state reached.
pub fn integrate_euler<F, O>(
    field: &F,
    z0: &State,
    delta: f64,
    steps: usize,
    mut observer: O,
) -> Result<State>
where
    F: VectorField + ?Sized,
    O: FnMut(usize, &State) -> ControlFlow<()>,
{
    check_delta(delta)?;
    let (n, m) = field.dims();
    if z0.dims() != (n, m) {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: n + m,
            found: z0.x.len() + z0.lambda.len(),
        });
    }
    let mut s = z0.clone();
    let mut d = StateDerivative::zeros(n, m);
    if observer(0, &s).is_break() {
        return Ok(s);
    }
    for k in 1..=steps {
        field.eval_into(&s, &mut d);
        if !d.is_finite() {
            return Err(Error::NonFiniteField { step: k });
        }
        field.euler_update(&mut s, delta, &d);
        let norm = s.norm();
        if !(norm <= DIVERGENCE_NORM) {
            return Err(Error::Diverged { step: k, norm });
        }
        if observer(k, &s).is_break() {
            break;
        }
    }
    Ok(s)
}

/// Recording options for [`simulate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Record every `stride`-th step (the final step is always recorded).
    pub stride: usize,
    /// Keep the recorded states, not just the derived scalars.
    pub keep_states: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            stride: 1,
            keep_states: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub delta: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    /// Recorded states; empty when `keep_states` was off.
    pub states: Vec<State>,
    /// `V(z(t))` when a certificate and an equilibrium were supplied.
    pub v_values: Option<Vec<f64>>,
    pub dist_x: Option<Vec<f64>>,
    pub dist_lambda: Option<Vec<f64>>,
    pub final_state: State,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `‖z(t) − z*‖` at the recorded times.
    pub fn distances(&self) -> Option<Vec<f64>> {
        let (dx, dl) = (self.dist_x.as_ref()?, self.dist_lambda.as_ref()?);
        Some(dx.iter().zip(dl).map(|(a, b)| a.hypot(*b)).collect())
    }

    /// See [`measured_rate`].
    pub fn measured_rate(&self) -> Option<f64> {
        Some(measured_rate(&self.times, &self.distances()?))
    }

    pub const CSV_HEADER: &'static str = "t,dist_x,dist_lambda,V";

    /// Writes `t,dist_x,dist_lambda,V` rows (`V` is `nan` without a
    /// certificate). Requires the distances.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let (Some(dx), Some(dl)) = (&self.dist_x, &self.dist_lambda) else {
            return Err(Error::InvalidParameter(
                "trajectory has no equilibrium distances".into(),
            ));
        };
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for i in 0..self.times.len() {
            let v = self.v_values.as_ref().map_or(f64::NAN, |v| v[i]);
            writeln!(
                w,
                "{},{},{},{}",
                fmt_g17(self.times[i]),
                fmt_g17(dx[i]),
                fmt_g17(dl[i]),
                fmt_g17(v)
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of Euler steps covering `horizon`: `⌈horizon/δ⌉`, ignoring
/// rounding noise in the quotient.
pub fn step_count(horizon: f64, delta: f64) -> usize {
    let q = horizon / delta;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        q.ceil() as usize
    }
}

/// Euler trajectory over `horizon`, recording every step.
pub fn simulate<F: VectorField + ?Sized>(
    field: &F,
    z0: &State,
    delta: f64,
    horizon: f64,
    cert: Option<&LyapunovCertificate>,
    eq: Option<&State>,
) -> Result<Trajectory> {
    simulate_with(field, z0, delta, horizon, cert, eq, SimOptions::default())
}

pub fn simulate_with<F: VectorField + ?Sized>(
    field: &F,
    z0: &State,
    delta: f64,
    horizon: f64,
    cert: Option<&LyapunovCertificate>,
    eq: Option<&State>,
    opts: SimOptions,
) -> Result<Trajectory> {
    check_delta(delta)?;
    if !(horizon >= delta) {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} is shorter than the step {delta}"
        )));
    }
    let steps = step_count(horizon, delta);
    let stride = opts.stride.max(1);
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut v_values = cert.and(eq).map(|_| Vec::new());
    let mut dist_x = eq.map(|_| Vec::new());
    let mut dist_lambda = eq.map(|_| Vec::new());
    let final_state = integrate_euler(field, z0, delta, steps, |k, s| {
        if k % stride == 0 || k == steps {
            times.push(k as f64 * delta);
            if opts.keep_states {
                states.push(s.clone());
            }
            if let Some(eq) = eq {
                dist_x.as_mut().unwrap().push((&s.x - &eq.x).norm());
                dist_lambda
                    .as_mut()
                    .unwrap()
                    .push((&s.lambda - &eq.lambda).norm());
                if let (Some(c), Some(v)) = (cert, v_values.as_mut()) {
                    v.push(c.value(s, eq));
                }
            }
        }
        ControlFlow::Continue(())
    })?;
    Ok(Trajectory {
        delta,
        steps,
        times,
        states,
        v_values,
        dist_x,
        dist_lambda,
        final_state,
    })
}

/// Least-squares decay rate `−slope` of `log d(t)` over the final half of
/// the samples. Samples at or below `1e-13·d(0)` (round-off floor) are
/// dropped first. Returns NaN with fewer than two usable samples.
pub fn measured_rate(times: &[f64], distances: &[f64]) -> f64 {
    let Some(&d0) = distances.first() else {
        return f64::NAN;
    };
    let floor = 1e-13 * d0;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(distances)
        .filter(|(_, &d)| d > floor && d > 0.0)
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    let tail = &pts[pts.len() / 2..];
    if tail.len() < 2 {
        return f64::NAN;
    }
    let k = tail.len() as f64;
    let mt = tail.iter().map(|p| p.0).sum::<f64>() / k;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = tail.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return f64::NAN;
    }
    -sxy / sxx
}

/// Block triangle-inequality bound on the Lipschitz constant of the field:
/// `ℓ + (1 + η)√κ₂` for equalities, `ℓ + ρκ₂ + (1 + η)√κ₂ + η/ρ` for the
/// augmented flows.
pub fn lipschitz_bound(p: &ConstrainedProblem, params: DynamicsParams) -> f64 {
    lipschitz_from_constants(p.kind(), p.ell(), p.bounds().kappa2, params.eta, params.rho)
}

pub fn lipschitz_from_constants(
    kind: ConstraintKind,
    ell: f64,
    kappa2: f64,
    eta: f64,
    rho: f64,
) -> f64 {
    let base = ell + (1.0 + eta) * kappa2.sqrt();
    match kind {
        ConstraintKind::Equality => base,
        _ => base + rho * kappa2 + eta / rho,
    }
}

/// Step size together with its contraction factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCertificate {
    pub delta: f64,
    pub tau: f64,
    pub nu: f64,
    pub kappa_p: f64,
    /// `r = e^{−τδ/2} + κ_P ν² δ²/2`.
    pub contraction: f64,
    pub admissible: bool,
}

/// Evaluates the contraction factor for step `delta`.
pub fn step_size_admissible(delta: f64, tau: f64, nu: f64, kappa_p: f64) -> StepCertificate {
    let contraction = (-tau * delta / 2.0).exp() + kappa_p * nu * nu * delta * delta / 2.0;
    StepCertificate {
        delta,
        tau,
        nu,
        kappa_p,
        contraction,
        admissible: contraction < 1.0,
    }
}

/// Largest `δ = 2^{−k}` with `r(δ) ≤ e^{−τδ/4}` (so at least half of the
/// continuous-time decay survives discretization) and, when `dual_cap` is
/// given, `δ ≤ dual_cap`.
pub fn choose_delta(
    tau: f64,
    nu: f64,
    kappa_p: f64,
    dual_cap: Option<f64>,
) -> Result<StepCertificate> {
    for k in 0..=1000 {
        let delta = (-(k as f64)).exp2();
        if delta == 0.0 {
            break;
        }
        if dual_cap.is_some_and(|cap| delta > cap) {
            continue;
        }
        let sc = step_size_admissible(delta, tau, nu, kappa_p);
        if sc.contraction <= (-tau * delta / 4.0).exp() {
            return Ok(sc);
        }
    }
    Err(Error::Infeasible(format!(
        "no representable step certifies contraction (tau = {tau:e}, nu = {nu:e}, kappa_P = {kappa_p:e})"
    )))
}

/// [`choose_delta`] for a problem and its certificate; the augmented flows
/// also require `δη/ρ ≤ 1`.
pub fn certified_step(
    p: &ConstrainedProblem,
    params: DynamicsParams,
    cert: &LyapunovCertificate,
) -> Result<StepCertificate> {
    let cap = (p.kind() != ConstraintKind::Equality).then(|| params.rho / params.eta);
    choose_delta(
        cert.tau(),
        lipschitz_bound(p, params),
        cert.condition_number(),
        cap,
    )
}

/// Largest `2^{−k}` not above `1/ν` (and `ρ/η` for the augmented flows).
/// Stable in practice but not certified.
pub fn practical_step(p: &ConstrainedProblem, params: DynamicsParams) -> f64 {
    let mut cap = 1.0 / lipschitz_bound(p, params);
    if p.kind() != ConstraintKind::Equality {
        cap = cap.min(params.rho / params.eta);
    }
    let k = (-cap.log2()).ceil().max(0.0);
    (-k).exp2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{FnField, PdgdField};
    use crate::problem::{ConstraintSet, Quadratic, SpectralBounds};
    use nalgebra::{DMatrix, DVector};

    fn decay() -> impl VectorField {
        FnField::new(1, 0, |s: &State, d: &mut StateDerivative| d.dx[0] = -s.x[0])
    }

    #[test]
    fn euler_examples() {
        let s = euler_step(&decay(), &State::from_slices(&[1.0], &[]), 0.1).unwrap();
        assert!((s.x[0] - 0.9).abs() < 1e-15);
        let zero = FnField::new(1, 1, |_: &State, d: &mut StateDerivative| {
            d.dx.fill(0.0);
            d.dlambda.fill(0.0);
        });
        let z = State::from_slices(&[3.0], &[-1.0]);
        assert_eq!(euler_step(&zero, &z, 0.5).unwrap(), z);

        let p = ConstrainedProblem::new(
            Quadratic::identity(1),
            ConstraintSet::Equality {
                a: DMatrix::identity(1, 1),
                b: DVector::from_element(1, 1.0),
            },
        )
        .unwrap();
        let field = PdgdField::new(&p, DynamicsParams::new(1.0, 1.0).unwrap());
        let s = euler_step(&field, &State::from_slices(&[2.0], &[0.0]), 0.5).unwrap();
        assert_eq!(s, State::from_slices(&[1.0], &[0.5]));
    }

    #[test]
    fn euler_rejects_non_finite() {
        let bad = FnField::new(1, 0, |_: &State, d: &mut StateDerivative| {
            d.dx[0] = f64::NAN
        });
        assert!(matches!(
            euler_step(&bad, &State::from_slices(&[1.0], &[]), 0.1),
            Err(Error::NonFiniteField { .. })
        ));
    }

    #[test]
    fn simulate_scalar_decay() {
        let traj = simulate(
            &decay(),
            &State::from_slices(&[1.0], &[]),
            0.1,
            1.0,
            None,
            None,
        )
        .unwrap();
        assert_eq!(traj.steps, 10);
        assert_eq!(traj.len(), 11);
        assert!((traj.final_state.x[0] - 0.9f64.powi(10)).abs() < 1e-14);
        assert!((traj.final_state.x[0] - 0.3487).abs() < 1e-4);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn simulate_from_equilibrium_stays() {
        let p = ConstrainedProblem::new(
            Quadratic::identity(1),
            ConstraintSet::Equality {
                a: DMatrix::identity(1, 1),
                b: DVector::from_element(1, 1.0),
            },
        )
        .unwrap();
        let field = PdgdField::new(&p, DynamicsParams::new(1.0, 1.0).unwrap());
        let eq = State::from_slices(&[1.0], &[-1.0]);
        let traj = simulate(&field, &eq, 0.01, 1.0, None, Some(&eq)).unwrap();
        assert!(traj.states.iter().all(|s| *s == eq));
        assert!(traj.distances().unwrap().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn divergence_detected() {
        let grow = FnField::new(1, 0, |s: &State, d: &mut StateDerivative| {
            d.dx[0] = 10.0 * s.x[0]
        });
        let err = simulate(
            &grow,
            &State::from_slices(&[1.0], &[]),
            1.0,
            100.0,
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(
            lipschitz_from_constants(ConstraintKind::Equality, 1.0, 1.0, 1.0, 1.0),
            3.0
        );
        assert_eq!(
            lipschitz_from_constants(ConstraintKind::Inequality, 1.0, 1.0, 1.0, 1.0),
            5.0
        );
        assert_eq!(
            lipschitz_from_constants(ConstraintKind::Equality, 2.0, 4.0, 0.0, 1.0),
            2.0 + 2.0
        );
        let p = ConstrainedProblem::with_bounds(
            Quadratic::identity(1),
            ConstraintSet::Equality {
                a: DMatrix::identity(1, 1),
                b: DVector::zeros(1),
            },
            SpectralBounds {
                kappa1: 1.0,
                kappa2: 1.0,
            },
        )
        .unwrap();
        assert_eq!(
            lipschitz_bound(&p, DynamicsParams::new(1.0, 1.0).unwrap()),
            3.0
        );
    }

    #[test]
    fn contraction_examples() {
        let sc = step_size_admissible(0.1, 1.0, 1.0, 1.0);
        assert!((sc.contraction - ((-0.05f64).exp() + 0.005)).abs() < 1e-15);
        assert!((sc.contraction - 0.9562).abs() < 1e-4);
        assert!(sc.admissible);
        let sc = step_size_admissible(2.0, 1.0, 1.0, 1.0);
        assert!((sc.contraction - ((-1.0f64).exp() + 2.0)).abs() < 1e-15);
        assert!(!sc.admissible);
        let sc = step_size_admissible(1e-4, 1.0, 1.0, 1.0);
        // first-order expansion; the dropped e^{−x} term is τ²δ²/8 ≈ 1.25e-9
        assert!((sc.contraction - (1.0 - 5e-5 + 5e-9)).abs() < 2e-9);
        assert!(sc.admissible);
    }

    #[test]
    fn chosen_delta_contracts() {
        let sc = choose_delta(0.25, 3.0, 1.7, None).unwrap();
        assert!(sc.admissible);
        assert!(sc.contraction <= (-0.25 * sc.delta / 4.0).exp());
        // the next larger power of two fails the requirement
        let bigger = step_size_admissible(2.0 * sc.delta, 0.25, 3.0, 1.7);
        assert!(bigger.contraction > (-0.25 * bigger.delta / 4.0).exp());
        let capped = choose_delta(0.25, 0.01, 1.0, Some(0.3)).unwrap();
        assert!(capped.delta <= 0.3);
    }

    #[test]
    fn rate_of_exponential() {
        let times: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let d: Vec<f64> = times.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        assert!((measured_rate(&times, &d) - 0.7).abs() < 1e-12);
    }
}
