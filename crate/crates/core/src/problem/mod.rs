//! Problem oracles for `φ = f + h`.
//!
//! `f` is exposed either through [`SmoothOracle`] (value and gradient) or
//! [`NonsmoothOracle`] (value and subgradient); `h` through [`ProxFriendly`]
//! (value and exact proximal map). Problems are immutable once built and can be
//! shared across concurrent solver runs.

mod generators;
pub mod io;
mod reference;
mod terms;

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::{Error, Result, Vector};

pub use generators::{
    lasso_from_data, make_lasso, make_maxaffine, maxaffine_from_data, power_iteration_lmax,
    LassoInstance, MaxAffineInstance,
};
pub use reference::{reference_solve, reference_solve_uncached, ReferenceSolution};
pub use terms::{
    BallIndicator, BoxIndicator, L1Norm, LeastSquares, MaxAffine, ProximalSubproblem, ZeroSmooth,
    ZeroTerm,
};

/// Convex, `L`-smooth part of the objective.
pub trait SmoothOracle: Send + Sync + fmt::Debug {
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn value_and_gradient(&self, x: &Vector) -> (f64, Vector) {
        (self.value(x), self.gradient(x))
    }
    /// Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
    /// A lower bound on the strong convexity modulus (zero when unknown).
    fn strong_convexity(&self) -> f64 {
        0.0
    }
}

/// Convex, `M`-Lipschitz part of the objective.
pub trait NonsmoothOracle: Send + Sync + fmt::Debug {
    fn value(&self, x: &Vector) -> f64;
    fn subgradient(&self, x: &Vector) -> Vector;
    fn value_and_subgradient(&self, x: &Vector) -> (f64, Vector) {
        (self.value(x), self.subgradient(x))
    }
    /// Lipschitz constant of the function itself (bounds every subgradient norm).
    fn lipschitz(&self) -> f64;
}

/// Convex term with a closed-form proximal map.
pub trait ProxFriendly: Send + Sync + fmt::Debug {
    /// Value at `x`; `+∞` outside the domain.
    fn value(&self, x: &Vector) -> f64;
    /// `argmin_u { h(u) + ‖u − center‖² / (2·weight) }` for `weight > 0`.
    fn prox(&self, center: &Vector, weight: f64) -> Vector;
}

/// The `f` half of the problem. Exactly one flavor is present by construction.
#[derive(Clone, Debug)]
pub enum Loss {
    Smooth(Arc<dyn SmoothOracle>),
    Nonsmooth(Arc<dyn NonsmoothOracle>),
}

#[derive(Clone, Debug)]
pub struct CompositeProblem {
    loss: Loss,
    h: Arc<dyn ProxFriendly>,
    dimension: usize,
    pub known_optimum: Option<f64>,
    pub known_minimizer: Option<Vector>,
}

impl CompositeProblem {
    pub fn smooth(f: Arc<dyn SmoothOracle>, h: Arc<dyn ProxFriendly>, dimension: usize) -> Self {
        Self {
            loss: Loss::Smooth(f),
            h,
            dimension,
            known_optimum: None,
            known_minimizer: None,
        }
    }

    pub fn nonsmooth(
        f: Arc<dyn NonsmoothOracle>,
        h: Arc<dyn ProxFriendly>,
        dimension: usize,
    ) -> Self {
        Self {
            loss: Loss::Nonsmooth(f),
            h,
            dimension,
            known_optimum: None,
            known_minimizer: None,
        }
    }

    /// Attach a reference solution (value and, optionally, a minimizer).
    pub fn with_reference(mut self, value: f64, minimizer: Option<Vector>) -> Self {
        self.known_optimum = Some(value);
        self.known_minimizer = minimizer;
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn loss(&self) -> &Loss {
        &self.loss
    }

    pub fn h(&self) -> &dyn ProxFriendly {
        self.h.as_ref()
    }

    pub fn h_arc(&self) -> Arc<dyn ProxFriendly> {
        Arc::clone(&self.h)
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self.loss, Loss::Smooth(_))
    }

    pub fn smooth_part(&self) -> Result<&dyn SmoothOracle> {
        match &self.loss {
            Loss::Smooth(f) => Ok(f.as_ref()),
            Loss::Nonsmooth(_) => Err(Error::WrongProblemKind("smooth")),
        }
    }

    pub fn smooth_arc(&self) -> Result<Arc<dyn SmoothOracle>> {
        match &self.loss {
            Loss::Smooth(f) => Ok(Arc::clone(f)),
            Loss::Nonsmooth(_) => Err(Error::WrongProblemKind("smooth")),
        }
    }

    pub fn nonsmooth_part(&self) -> Result<&dyn NonsmoothOracle> {
        match &self.loss {
            Loss::Nonsmooth(f) => Ok(f.as_ref()),
            Loss::Smooth(_) => Err(Error::WrongProblemKind("nonsmooth")),
        }
    }

    /// `L` for smooth problems, `M` for nonsmooth ones.
    pub fn lipschitz(&self) -> f64 {
        match &self.loss {
            Loss::Smooth(f) => f.lipschitz(),
            Loss::Nonsmooth(f) => f.lipschitz(),
        }
    }

    pub fn f_value(&self, x: &Vector) -> f64 {
        match &self.loss {
            Loss::Smooth(f) => f.value(x),
            Loss::Nonsmooth(f) => f.value(x),
        }
    }

    /// `φ(x) = f(x) + h(x)` without the dimension check; `+∞` outside dom h.
    pub fn objective(&self, x: &Vector) -> f64 {
        let hv = self.h.value(x);
        if hv == f64::INFINITY {
            return f64::INFINITY;
        }
        self.f_value(x) + hv
    }

    pub fn eval_phi(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.objective(x))
    }

    pub fn prox_h(&self, center: &Vector, weight: f64) -> Result<Vector> {
        self.check_dim(center)?;
        if !(weight > 0.0) {
            return Err(Error::invalid(format!(
                "prox weight must be positive, got {weight}"
            )));
        }
        Ok(self.h.prox(center, weight))
    }

    pub fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Hash of the oracle responses at a few fixed probe points. Two problems
    /// with the same fingerprint answer those probes bit-identically.
    pub fn fingerprint(&self) -> u64 {
        let n = self.dimension;
        let mut hasher = DefaultHasher::new();
        n.hash(&mut hasher);
        self.is_smooth().hash(&mut hasher);
        self.lipschitz().to_bits().hash(&mut hasher);
        let probes = [
            Vector::zeros(n),
            Vector::from_fn(n, |i, _| 1.0 + i as f64 / n as f64),
            Vector::from_fn(n, |i, _| if i % 2 == 0 { 0.5 } else { -0.75 }),
        ];
        let hash_vec = |v: &Vector, hasher: &mut DefaultHasher| {
            for x in v.iter() {
                x.to_bits().hash(hasher);
            }
        };
        for p in &probes {
            let (value, slope) = match &self.loss {
                Loss::Smooth(f) => f.value_and_gradient(p),
                Loss::Nonsmooth(f) => f.value_and_subgradient(p),
            };
            value.to_bits().hash(&mut hasher);
            hash_vec(&slope, &mut hasher);
            self.h.value(p).to_bits().hash(&mut hasher);
            hash_vec(&self.h.prox(p, 1.0), &mut hasher);
        }
        hasher.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix;

    fn half_sq_norm(n: usize) -> Arc<dyn SmoothOracle> {
        Arc::new(LeastSquares::new(Matrix::identity(n, n), Vector::zeros(n)))
    }

    #[test]
    fn phi_of_zero_functions_is_zero() {
        let p = CompositeProblem::smooth(Arc::new(ZeroSmooth), Arc::new(ZeroTerm), 2);
        assert_eq!(p.eval_phi(&Vector::from_vec(vec![1.0, 2.0])).unwrap(), 0.0);
    }

    #[test]
    fn phi_half_norm_plus_l1() {
        let p = CompositeProblem::smooth(half_sq_norm(2), Arc::new(L1Norm::new(1.0)), 2);
        let x = Vector::from_vec(vec![1.0, -1.0]);
        assert!((p.eval_phi(&x).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn phi_dimension_mismatch() {
        let p = CompositeProblem::smooth(half_sq_norm(2), Arc::new(ZeroTerm), 2);
        let err = p.eval_phi(&Vector::zeros(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 3 }));
    }

    #[test]
    fn phi_infinite_outside_indicator() {
        let p = CompositeProblem::smooth(half_sq_norm(2), Arc::new(BallIndicator::new(1.0)), 2);
        let v = p.eval_phi(&Vector::from_vec(vec![3.0, 4.0])).unwrap();
        assert_eq!(v, f64::INFINITY);
    }

    #[test]
    fn prox_examples() {
        let zero = CompositeProblem::smooth(half_sq_norm(2), Arc::new(ZeroTerm), 2);
        let c = Vector::from_vec(vec![3.0, 4.0]);
        assert_eq!(zero.prox_h(&c, 7.0).unwrap(), c);

        let l1 = CompositeProblem::smooth(half_sq_norm(2), Arc::new(L1Norm::new(1.0)), 2);
        let p = l1.prox_h(&Vector::from_vec(vec![2.0, -0.5]), 1.0).unwrap();
        assert_eq!(p, Vector::from_vec(vec![1.0, 0.0]));

        let ball = CompositeProblem::smooth(half_sq_norm(2), Arc::new(BallIndicator::new(1.0)), 2);
        let p = ball.prox_h(&c, 2.0).unwrap();
        assert!((p - Vector::from_vec(vec![0.6, 0.8])).norm() < 1e-15);
    }

    #[test]
    fn prox_rejects_nonpositive_weight() {
        let p = CompositeProblem::smooth(half_sq_norm(2), Arc::new(ZeroTerm), 2);
        assert!(matches!(
            p.prox_h(&Vector::zeros(2), 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(p.prox_h(&Vector::zeros(2), -1.0).is_err());
    }

    #[test]
    fn wrong_kind_is_reported() {
        let p = CompositeProblem::smooth(half_sq_norm(1), Arc::new(ZeroTerm), 1);
        assert!(p.nonsmooth_part().is_err());
        assert!(p.smooth_part().is_ok());
    }

    #[test]
    fn fingerprint_separates_problems() {
        let a = make_lasso(3, 10, 5, 0.1).unwrap();
        let b = make_lasso(3, 10, 5, 0.1).unwrap();
        let c = make_lasso(4, 10, 5, 0.1).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
