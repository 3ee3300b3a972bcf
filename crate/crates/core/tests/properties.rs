use std::ops::ControlFlow;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use saddle_core::certificates::{build_certificate, dual_block_schur_margin, lmi_sweep_with};
use saddle_core::dynamics::{
    effective_multiplier, field, gamma_coefficients, multiplier_argument, multiplier_map,
    penalty_gradient, penalty_value, soft_threshold, PdgdField,
};
use saddle_core::equilibrium::{
    kkt_residual, solve_equilibrium, solve_equilibrium_from, DEFAULT_TOL,
};
use saddle_core::experiments::{
    gen_equality_qp, gen_logistic_ineq, gen_two_sided_qp, initial_state,
};
use saddle_core::integrator::integrate_euler;
use saddle_core::io::{parse_problem, problem_to_string};
use saddle_core::linalg::{gaussian_matrix, sym_eig_extremes};
use saddle_core::problem::{spectral_bounds, validate_problem, RowBound};
use saddle_core::spectral::{eta_sweep_with, lti_matrix, tau_eq};
use saddle_core::{
    ConstrainedProblem, ConstraintKind, DynamicsParams, Execution, ObjectiveOracle, State,
};

fn bound_strategy() -> impl Strategy<Value = RowBound> {
    prop_oneof![
        (-3.0..3.0f64).prop_map(RowBound::Upper),
        (-3.0..3.0f64, 0.01..3.0f64).prop_map(|(lo, w)| RowBound::Band { lo, hi: lo + w }),
    ]
}

fn gains() -> impl Strategy<Value = DynamicsParams> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(e, r)| DynamicsParams {
        eta: 10f64.powf(e),
        rho: 10f64.powf(r),
    })
}

fn problem(kind: u8, seed: u64) -> ConstrainedProblem {
    match kind % 3 {
        0 => gen_equality_qp(seed, 4, 2).unwrap(),
        1 => gen_logistic_ineq(seed, 4, 3, 20, 0.1).unwrap(),
        _ => gen_two_sided_qp(seed, 4, 3).unwrap(),
    }
}

fn random_state(p: &ConstrainedProblem, seed: u64, scale: f64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = saddle_core::linalg::gaussian_vector(p.n(), &mut rng) * scale;
    let lambda = saddle_core::linalg::gaussian_vector(p.m(), &mut rng) * scale;
    State::new(x, lambda)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn penalty_gradient_matches_finite_differences(
        bound in bound_strategy(), ax in -5.0..5.0f64, lam in -5.0..5.0f64, rho in 0.1..5.0f64,
    ) {
        let h = 1e-6;
        let (gx, gl) = penalty_gradient(bound, ax, lam, rho);
        let fx = (penalty_value(bound, ax + h, lam, rho) - penalty_value(bound, ax - h, lam, rho)) / (2.0 * h);
        let fl = (penalty_value(bound, ax, lam + h, rho) - penalty_value(bound, ax, lam - h, rho)) / (2.0 * h);
        prop_assert!((gx - fx).abs() <= 1e-5 * (1.0 + gx.abs()), "d/dax {gx} vs {fx}");
        prop_assert!((gl - fl).abs() <= 1e-5 * (1.0 + gl.abs()), "d/dlam {gl} vs {fl}");
    }

    #[test]
    fn soft_threshold_is_monotone_and_nonexpansive(y in -5.0..5.0f64, z in -5.0..5.0f64, lo in -2.0..2.0f64, w in 0.01..2.0f64) {
        let (sy, sz) = (soft_threshold(y, lo, lo + w).unwrap(), soft_threshold(z, lo, lo + w).unwrap());
        prop_assert!((sy - sz) * (y - z) >= 0.0);
        prop_assert!((sy - sz).abs() <= (y - z).abs() + 1e-15);
    }

    #[test]
    fn field_blocks_follow_the_multipliers(kind in 0u8..3, seed in 0u64..50, params in gains(), s_seed in 0u64..1000) {
        let p = problem(kind, seed);
        let s = random_state(&p, s_seed, 2.0);
        let d = field(&p, params, &s).unwrap();
        let ax = p.a() * &s.x;
        let mult = DVector::from_fn(p.m(), |j, _| match p.constraints().row_bound(j) {
            None => s.lambda[j],
            Some(b) => effective_multiplier(b, ax[j], s.lambda[j], params.rho),
        });
        let grad = p.objective().gradient(&s.x);
        let dx = -(&grad + p.a().transpose() * &mult);
        prop_assert!((&d.dx - &dx).norm() <= 1e-10 * (1.0 + dx.norm()));
        for j in 0..p.m() {
            let want = match p.constraints().row_bound(j) {
                None => {
                    let b = match p.constraints() {
                        saddle_core::ConstraintSet::Equality { b, .. } => b[j],
                        _ => unreachable!(),
                    };
                    params.eta * (ax[j] - b)
                }
                Some(_) => params.eta * (mult[j] - s.lambda[j]) / params.rho,
            };
            prop_assert!((d.dlambda[j] - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn field_vanishes_at_equilibrium(kind in 0u8..3, seed in 0u64..30, params in gains()) {
        let p = problem(kind, seed);
        let eq = solve_equilibrium(&p, params, DEFAULT_TOL).unwrap();
        let d = field(&p, params, &eq.state()).unwrap();
        prop_assert!(d.norm() <= 1e-7, "{}", d.norm());
    }

    #[test]
    fn gains_are_secant_slopes(kind in 1u8..3, seed in 0u64..30, params in gains(), s_seed in 0u64..1000) {
        let p = problem(kind, seed);
        let eq = solve_equilibrium(&p, params, DEFAULT_TOL).unwrap().state();
        let s = random_state(&p, s_seed, 3.0);
        let g = gamma_coefficients(&p, params, &s, &eq);
        let (ax, axs) = (p.a() * &s.x, p.a() * &eq.x);
        for j in 0..p.m() {
            let b = p.constraints().row_bound(j).unwrap();
            let y = multiplier_argument(b, ax[j], s.lambda[j], params.rho);
            let ys = multiplier_argument(b, axs[j], eq.lambda[j], params.rho);
            let gj = g.0[j];
            prop_assert!((0.0..=1.0).contains(&gj));
            let lhs = multiplier_map(b, y, params.rho) - multiplier_map(b, ys, params.rho);
            prop_assert!((lhs - gj * (y - ys)).abs() <= 1e-9 * (1.0 + (y - ys).abs()));
        }
    }

    #[test]
    fn multipliers_stay_nonnegative(seed in 0u64..200, params in gains(), frac in 0.01..=1.0f64) {
        let p = gen_logistic_ineq(seed, 5, 3, 20, 0.1).unwrap();
        let delta = frac * params.rho / params.eta;
        prop_assume!(delta * params.eta / params.rho <= 1.0);
        let z0 = initial_state(seed, 5, 3, ConstraintKind::Inequality);
        let mut min_lambda = f64::INFINITY;
        let _ = integrate_euler(&PdgdField::new(&p, params), &z0, delta, 300, |_, s| {
            min_lambda = min_lambda.min(s.lambda.min());
            ControlFlow::Continue(())
        });
        prop_assert!(min_lambda >= 0.0, "{min_lambda}");
    }

    #[test]
    fn equilibrium_is_unique(kind in 0u8..3, seed in 0u64..30, s_seed in 0u64..1000) {
        let p = problem(kind, seed);
        let params = DynamicsParams { eta: 1.0, rho: 1.0 };
        let base = solve_equilibrium(&p, params, DEFAULT_TOL).unwrap().state();
        let mut start = random_state(&p, s_seed, 5.0);
        if p.kind() == ConstraintKind::Inequality {
            start.lambda.apply(|v| *v = v.abs());
        }
        let other = solve_equilibrium_from(&p, params, DEFAULT_TOL, &start).unwrap();
        prop_assert!(other.state().distance(&base) <= 1e-7);
        prop_assert!(kkt_residual(&p, &other.state()).total() <= 1e-8);
    }

    #[test]
    fn generated_problems_validate(kind in 0u8..3, seed in 0u64..1000) {
        prop_assert!(validate_problem(&problem(kind, seed), 50, seed).pass);
    }

    #[test]
    fn problem_text_round_trips(kind in 0u8..3, seed in 0u64..100) {
        let p = problem(kind, seed);
        let text = problem_to_string(&p).unwrap();
        let q = parse_problem(&text).unwrap();
        prop_assert_eq!(q.a(), p.a());
        prop_assert_eq!(problem_to_string(&q).unwrap(), text);
        prop_assert_eq!(q.mu().to_bits(), p.mu().to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lti_is_hurwitz_and_above_the_bound(seed in 0u64..10_000, n in 1usize..7, m_frac in 0.0..1.0f64, log_eta in -2.0..2.0f64) {
        let m = 1 + ((n - 1) as f64 * m_frac) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w0 = gaussian_matrix(n, n, &mut rng);
        let w = saddle_core::linalg::symmetrize(&(&w0 * w0.transpose() + DMatrix::identity(n, n) * 0.5));
        let a = gaussian_matrix(m, n, &mut rng);
        prop_assume!(spectral_bounds(&a).is_ok());
        let eta = 10f64.powf(log_eta);
        let sys = lti_matrix(&w, &a, eta).unwrap();
        prop_assert!(sys.abscissa < 0.0);
        let (mu, ell) = sym_eig_extremes(&w);
        let k = spectral_bounds(&a).unwrap();
        let half = tau_eq(eta, mu, ell, k.kappa1, k.kappa2) / 2.0;
        prop_assert!(sys.rate() >= half - 1e-9, "rate {} < tau/2 {}", sys.rate(), half);
    }

    #[test]
    fn dual_block_bound_holds_from_rho_kappa2(seed in 0u64..10_000, params in gains(), extra in 1.0..100.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gaussian_matrix(4, 6, &mut rng);
        let k2 = sym_eig_extremes(&(&a * a.transpose())).1;
        let c = extra * params.rho * k2;
        for mask in 0..16u32 {
            let g = DVector::from_fn(4, |j, _| if mask >> j & 1 == 1 { 1.0 } else { 0.0 });
            let margin = dual_block_schur_margin(&a, params, c, &g);
            prop_assert!(margin >= -1e-8 * params.eta * k2, "{margin}");
        }
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let p = gen_logistic_ineq(3, 6, 5, 40, 0.1).unwrap();
    let params = DynamicsParams { eta: 1.0, rho: 1.0 };
    let cert = build_certificate(&p, params).unwrap();
    let seq = lmi_sweep_with(&cert, &p, params, 20, 5, Execution::Sequential).unwrap();
    let par = lmi_sweep_with(&cert, &p, params, 20, 5, Execution::Parallel).unwrap();
    assert_eq!(seq, par);

    let q = gen_equality_qp(42, 5, 2).unwrap();
    let w = q.objective().as_quadratic().unwrap().matrix();
    let grid = [0.01, 0.1, 1.0, 10.0, 100.0];
    assert_eq!(
        eta_sweep_with(w, q.a(), &grid, Execution::Sequential).unwrap(),
        eta_sweep_with(w, q.a(), &grid, Execution::Parallel).unwrap()
    );
}
