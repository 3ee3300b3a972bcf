use thiserror::Error;

use crate::problem::ConstraintKind;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("constraint matrix is rank deficient: lambda_min(AA^T) = {lambda_min:e} <= {tol:e}")]
    RankDeficient { lambda_min: f64, tol: f64 },

    #[error("invalid band: lower bound {lo} is not below upper bound {hi}")]
    InvalidBand { lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires {expected:?} constraints, problem has {found:?}")]
    WrongConstraintKind {
        expected: ConstraintKind,
        found: ConstraintKind,
    },

    #[error("vector field returned a non-finite value at step {step}")]
    NonFiniteField { step: usize },

    #[error("trajectory diverged at step {step}: state norm {norm:e}")]
    Diverged { step: usize, norm: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("inactive constraint {row} has no slack (b - a^T x* = {slack:e})")]
    NoSlack { row: usize, slack: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
