//! Primal-dual gradient dynamics for constrained convex optimization, with
//! Lyapunov certificates for their exponential stability.

// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod io;
pub mod linalg;
pub mod parallel;
pub mod problem;
pub mod spectral;

pub use certificates::{CertificateVariant, LmiReport, LyapunovCertificate};
pub use dynamics::{PdgdField, State, StateDerivative, VectorField};
pub use equilibrium::{Equilibrium, KktResidual};
pub use error::{Error, Result};
pub use integrator::{StepCertificate, Trajectory};
pub use parallel::Execution;
pub use problem::{
    ConstrainedProblem, ConstraintKind, ConstraintSet, DynamicsParams, LogisticRidge, Objective,
    ObjectiveOracle, Quadratic,
};
