//! Exact decay rates of the equality-constrained flow for quadratic
//! objectives.
//!
//! With `f(x) = ½xᵀWx + qᵀx` the flow is linear time-invariant,
//! `ż = G(z − z*)` with `G = [[−W, −Aᵀ], [ηA, 0]]`, and its exact decay rate
//! is `−max Re λ(G)`.

use std::io::Write;
use std::path::Path;

use nalgebra::{Complex, DMatrix};

use crate::error::{check_dim, Error, Result};
use crate::io::fmt_g17;
use crate::linalg::{max_asymmetry, sym_eig_extremes};
use crate::parallel::Execution;
use crate::problem::spectral_bounds;

#[derive(Debug, Clone)]
pub struct LtiSystem {
    pub g: DMatrix<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    /// Largest real part of the eigenvalues of `G`.
    pub abscissa: f64,
}

impl LtiSystem {
    /// Exact exponential decay rate `−abscissa`.
    pub fn rate(&self) -> f64 {
        -self.abscissa
    }
}

/// Builds `G = [[−W, −Aᵀ], [ηA, 0]]` and its spectrum. `A` may have zero
/// rows.
pub fn lti_matrix(w: &DMatrix<f64>, a: &DMatrix<f64>, eta: f64) -> Result<LtiSystem> {
    let n = w.nrows();
    check_dim("W columns", n, w.ncols())?;
    check_dim("A columns", n, a.ncols())?;
    let asym = max_asymmetry(w);
    if asym > 1e-12 * w.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let m = a.nrows();
    let mut g = DMatrix::zeros(n + m, n + m);
    g.view_mut((0, 0), (n, n)).copy_from(&(-w));
    g.view_mut((0, n), (n, m)).copy_from(&(-a.transpose()));
    g.view_mut((n, 0), (m, n)).copy_from(&(a * eta));
    let eigenvalues: Vec<Complex<f64>> = g.clone().complex_eigenvalues().iter().copied().collect();
    let abscissa = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LtiSystem {
        g,
        eigenvalues,
        abscissa,
    })
}

/// One point of an η-sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSweepRow {
    pub eta: f64,
    /// Exact rate `−max Re λ(G)`.
    pub rate: f64,
    /// Certified lower bound `τ_eq(η)/2` on the distance decay rate.
    pub tau_half: f64,
}

/// `τ_eq(η) = min(ηκ₁/(4ℓ), κ₁μ/(4κ₂))`.
pub fn tau_eq(eta: f64, mu: f64, ell: f64, kappa1: f64, kappa2: f64) -> f64 {
    (eta * kappa1 / (4.0 * ell)).min(kappa1 * mu / (4.0 * kappa2))
}

pub fn eta_sweep(w: &DMatrix<f64>, a: &DMatrix<f64>, grid: &[f64]) -> Result<Vec<EtaSweepRow>> {
    eta_sweep_with(w, a, grid, Execution::default())
}

pub fn eta_sweep_with(
    w: &DMatrix<f64>,
    a: &DMatrix<f64>,
    grid: &[f64],
    exec: Execution,
) -> Result<Vec<EtaSweepRow>> {
    if grid.is_empty() || grid.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter(
            "eta grid must be nonempty and positive".into(),
        ));
    }
    let (mu, ell) = sym_eig_extremes(w);
    let k = spectral_bounds(a)?;
    exec.map(grid, |&eta| {
        let sys = lti_matrix(w, a, eta)?;
        Ok(EtaSweepRow {
            eta,
            rate: sys.rate(),
            tau_half: tau_eq(eta, mu, ell, k.kappa1, k.kappa2) / 2.0,
        })
    })
    .into_iter()
    .collect()
}

/// `n` points evenly spaced in `log η` from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && n >= 1) || (n == 1 && hi != lo) {
        return Err(Error::InvalidParameter(format!(
            "log grid needs 0 < lo <= hi and at least one point (got {lo}:{hi}:{n})"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)
            }
        })
        .collect())
}

/// Relative rate increase per decade of `η` between two sweep points.
pub fn growth_per_decade(a: &EtaSweepRow, b: &EtaSweepRow) -> f64 {
    let decades = (b.eta / a.eta).log10();
    (b.rate / a.rate).powf(1.0 / decades) - 1.0
}

/// Index of the smallest grid value past which the rate grows by less
/// than 5% per decade between every pair of consecutive points.
pub fn saturation_knee(rows: &[EtaSweepRow]) -> Option<usize> {
    let mut knee = None;
    for i in (0..rows.len().saturating_sub(1)).rev() {
        if growth_per_decade(&rows[i], &rows[i + 1]) < 0.05 {
            knee = Some(i);
        } else {
            break;
        }
    }
    knee
}

/// Saturation of the exact rate in `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationReport {
    pub knee_index: usize,
    pub eta_hat: f64,
    /// Rates on the grid are non-decreasing up to the knee.
    pub monotone_to_knee: bool,
    pub rate_10: f64,
    pub rate_100: f64,
    /// `rate(100η̂) ≤ 1.05·rate(10η̂)`.
    pub saturated: bool,
    /// Every grid rate is at least `τ_eq(η)/2`.
    pub bound_holds: bool,
}

pub fn saturation_check(
    w: &DMatrix<f64>,
    a: &DMatrix<f64>,
    rows: &[EtaSweepRow],
) -> Result<Option<SaturationReport>> {
    let Some(knee) = saturation_knee(rows) else {
        return Ok(None);
    };
    let eta_hat = rows[knee].eta;
    let rate_10 = lti_matrix(w, a, 10.0 * eta_hat)?.rate();
    let rate_100 = lti_matrix(w, a, 100.0 * eta_hat)?.rate();
    let monotone_to_knee = rows[..=knee]
        .windows(2)
        .all(|p| p[1].rate >= p[0].rate - 1e-12 * p[0].rate.abs());
    Ok(Some(SaturationReport {
        knee_index: knee,
        eta_hat,
        monotone_to_knee,
        rate_10,
        rate_100,
        saturated: rate_100 <= 1.05 * rate_10,
        bound_holds: rows.iter().all(|r| r.rate >= r.tau_half - 1e-9),
    }))
}

pub const SWEEP_CSV_HEADER: &str = "eta,rate,tau_half";

pub fn write_sweep_csv(rows: &[EtaSweepRow], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{}",
            fmt_g17(r.eta),
            fmt_g17(r.rate),
            fmt_g17(r.tau_half)
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Roots of `λ² + pλ + q`, the characteristic polynomial of the scalar
    /// system `[[−p, −1], [q, 0]]`.
    fn quadratic_roots(p: f64, q: f64) -> (Complex<f64>, Complex<f64>) {
        let disc = p * p - 4.0 * q;
        if disc >= 0.0 {
            let s = disc.sqrt();
            (
                Complex::new((-p + s) / 2.0, 0.0),
                Complex::new((-p - s) / 2.0, 0.0),
            )
        } else {
            let s = (-disc).sqrt();
            (
                Complex::new(-p / 2.0, s / 2.0),
                Complex::new(-p / 2.0, -s / 2.0),
            )
        }
    }

    fn one() -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    #[test]
    fn pure_gradient_flow() {
        let sys = lti_matrix(&one(), &DMatrix::zeros(0, 1), 1.0).unwrap();
        assert_eq!(sys.g, DMatrix::from_element(1, 1, -1.0));
        assert!((sys.abscissa + 1.0).abs() < 1e-15);
        assert!((sys.rate() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_examples_match_characteristic_polynomial() {
        for eta in [1.0, 4.0] {
            let sys = lti_matrix(&one(), &one(), eta).unwrap();
            let (r1, r2) = quadratic_roots(1.0, eta);
            let mut got = sys.eigenvalues.clone();
            got.sort_by(|a, b| b.im.partial_cmp(&a.im).unwrap());
            assert!((got[0] - r1).norm() < 1e-12 && (got[1] - r2).norm() < 1e-12);
            assert!((sys.rate() - 0.5).abs() < 1e-12);
        }
        let (r1, _) = quadratic_roots(1.0, 1.0);
        assert!((r1.im - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_w() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            lti_matrix(&w, &DMatrix::zeros(0, 2), 1.0),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn scalar_sweep() {
        let rows = eta_sweep(&one(), &one(), &[1.0, 4.0, 100.0]).unwrap();
        for r in &rows {
            assert!((r.rate - 0.5).abs() < 1e-9);
            assert!(r.rate >= r.tau_half - 1e-9);
        }
        // λ² + λ + η has roots near {−η, −1 + η} for small η.
        let small = eta_sweep(&one(), &one(), &[1e-6]).unwrap()[0];
        let (r1, _) = quadratic_roots(1.0, 1e-6);
        assert!((small.rate + r1.re).abs() < 1e-12);
        assert!(small.rate < 2e-6);
    }

    #[test]
    fn knee_on_flat_tail() {
        let rows: Vec<EtaSweepRow> = [
            (0.01, 0.01),
            (0.1, 0.1),
            (1.0, 0.5),
            (10.0, 0.5),
            (100.0, 0.5),
        ]
        .iter()
        .map(|&(eta, rate)| EtaSweepRow {
            eta,
            rate,
            tau_half: 0.0,
        })
        .collect();
        assert_eq!(saturation_knee(&rows), Some(2));
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(0.01, 100.0, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!((g[0], g[4]), (0.01, 100.0));
        assert!((g[2] - 1.0).abs() < 1e-12);
        assert!(log_grid(0.0, 1.0, 3).is_err());
    }
}
