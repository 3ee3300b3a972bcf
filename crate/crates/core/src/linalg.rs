//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
///
/// The input is symmetrized first, so tiny rounding asymmetries from
/// products such as `A * A^T` do not matter.
pub fn sym_eig_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    assert!(
        m.is_square() && m.nrows() > 0,
        "need a nonempty square matrix"
    );
    let s = symmetrize(m);
    let eig = SymmetricEigen::new(s).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

pub fn sym_lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eig_extremes(m).0
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_norm(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = sym_eig_extremes(m);
    lo.abs().max(hi.abs())
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Matrix with i.i.d. standard normal entries, filled row by row.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            out[(i, j)] = rng.sample(StandardNormal);
        }
    }
    out
}

pub fn gaussian_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| rng.sample(StandardNormal)))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of `R`'s diagonal folded into `Q`).
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Euclidean norm of the concatenation `(a, b)`.
pub fn stacked_norm(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a.norm_squared() + b.norm_squared()).sqrt()
}
