//! Restart accelerated composite gradient (restart ACG) and the modern proximal
//! bundle method (MPB), both built as inner solvers for an inexact proximal-point
//! outer loop, plus FISTA and subgradient baselines, invariant verification and
//! an experiment harness.
//!
//! The problem class is `min φ(x) = f(x) + h(x)` with `f` either smooth
//! (gradient oracle) or Lipschitz (subgradient oracle) and `h` prox-friendly.

pub mod acg;
pub mod baselines;
pub mod bundle;
pub mod error;
pub mod harness;
pub mod hpe;
pub mod problem;
pub mod restart;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};

/// Dense column vector used for every point and slope.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used by the generated test problems.
pub type Matrix = nalgebra::DMatrix<f64>;
