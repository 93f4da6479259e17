//! Triples `(w̃, u, η)` with `u ∈ ∂_η φ(w̃)`: the contract between the inner
//! solvers (ACG, bundle) and the proximal-point outer loops.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::problem::CompositeProblem;
use crate::Vector;

#[derive(Clone, Debug, PartialEq)]
pub struct HpeTriple {
    pub w_tilde: Vector,
    pub u: Vector,
    pub eta: f64,
    /// Literal left residual of the acceptance test, e.g. `‖λu + w̃ − z̃‖²`.
    pub residual_sq: f64,
    /// Right side the test compared `residual_sq + 2λη` against.
    pub criterion_rhs: f64,
}

impl HpeTriple {
    pub fn criterion_lhs(&self, lam: f64) -> f64 {
        self.residual_sq + 2.0 * lam * self.eta
    }
}

/// Worst normalized slack of `φ(u) ≥ φ(w̃) + ⟨u_k, u − w̃⟩ − η` over `samples`
/// random points around `w̃`. Points are drawn at several radii so both local
/// and far-field behavior is probed. Negative means violated; the slack is
/// divided by `1 + |φ(u)| + |φ(w̃)|`.
pub fn sampled_subgradient_slack<R: Rng>(
    problem: &CompositeProblem,
    triple: &HpeTriple,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let n = problem.dimension();
    let phi_w = problem.objective(&triple.w_tilde);
    let mut worst = f64::INFINITY;
    for i in 0..samples {
        let radius = 10f64.powi((i % 5) as i32 - 3);
        let dir = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let u = &triple.w_tilde + dir * radius;
        let phi_u = problem.objective(&u);
        if phi_u == f64::INFINITY {
            continue;
        }
        let lower = phi_w + triple.u.dot(&(&u - &triple.w_tilde)) - triple.eta;
        let slack = (phi_u - lower) / (1.0 + phi_u.abs() + phi_w.abs());
        worst = worst.min(slack);
    }
    worst
}
