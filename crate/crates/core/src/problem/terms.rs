use std::sync::Arc;

use super::{NonsmoothOracle, ProxFriendly, SmoothOracle};
use crate::{Matrix, Vector};

/// Relative slack used when testing membership in an indicator's set.
const FEASIBILITY_SLACK: f64 = 1e-12;

/// `f(x) = ½‖Ax − b‖²`.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    a: Matrix,
    b: Vector,
    lipschitz: f64,
    strong_convexity: f64,
}

impl LeastSquares {
    /// Computes `L = λ_max(AᵀA)` by power iteration and the smallest eigenvalue
    /// of `AᵀA` (zero when `A` has fewer rows than columns).
    pub fn new(a: Matrix, b: Vector) -> Self {
        assert_eq!(a.nrows(), b.len(), "A and b row counts differ");
        let gram = a.transpose() * &a;
        let lipschitz = super::power_iteration_lmax(&gram);
        let strong_convexity = if a.nrows() < a.ncols() {
            0.0
        } else {
            let min_eig = gram.symmetric_eigenvalues().min();
            // shave a little so rounding in the eigensolver never overstates it
            (min_eig - 1e-10 * lipschitz).max(0.0)
        };
        Self {
            a,
            b,
            lipschitz,
            strong_convexity,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn rhs(&self) -> &Vector {
        &self.b
    }
}

impl SmoothOracle for LeastSquares {
    fn value(&self, x: &Vector) -> f64 {
        0.5 * (&self.a * x - &self.b).norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.a.tr_mul(&(&self.a * x - &self.b))
    }

    fn value_and_gradient(&self, x: &Vector) -> (f64, Vector) {
        let r = &self.a * x - &self.b;
        (0.5 * r.norm_squared(), self.a.tr_mul(&r))
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }
}

/// `f ≡ 0`. Any positive number is a valid gradient Lipschitz constant; we use 1.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroSmooth;

impl SmoothOracle for ZeroSmooth {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }
    fn gradient(&self, x: &Vector) -> Vector {
        Vector::zeros(x.len())
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// `f(u) + ‖u − center‖² / (2λ)`: the smooth part of a proximal subproblem.
#[derive(Clone, Debug)]
pub struct ProximalSubproblem {
    inner: Arc<dyn SmoothOracle>,
    center: Vector,
    lam: f64,
}

impl ProximalSubproblem {
    pub fn new(inner: Arc<dyn SmoothOracle>, center: Vector, lam: f64) -> Self {
        Self { inner, center, lam }
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }
}

impl SmoothOracle for ProximalSubproblem {
    fn value(&self, x: &Vector) -> f64 {
        self.inner.value(x) + (x - &self.center).norm_squared() / (2.0 * self.lam)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.inner.gradient(x) + (x - &self.center) / self.lam
    }

    fn value_and_gradient(&self, x: &Vector) -> (f64, Vector) {
        let (v, g) = self.inner.value_and_gradient(x);
        let d = x - &self.center;
        (
            v + d.norm_squared() / (2.0 * self.lam),
            g + d / self.lam,
        )
    }

    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz() + 1.0 / self.lam
    }

    fn strong_convexity(&self) -> f64 {
        self.inner.strong_convexity() + 1.0 / self.lam
    }
}

/// `f(x) = max_i { ⟨g_i, x⟩ + c_i }`, rows of `slopes` are the `g_i`.
#[derive(Clone, Debug)]
pub struct MaxAffine {
    slopes: Matrix,
    offsets: Vector,
    lipschitz: f64,
}

impl MaxAffine {
    pub fn new(slopes: Matrix, offsets: Vector) -> Self {
        assert_eq!(slopes.nrows(), offsets.len(), "one offset per piece");
        assert!(slopes.nrows() >= 1, "at least one piece");
        let lipschitz = slopes
            .row_iter()
            .map(|r| r.norm())
            .fold(0.0_f64, f64::max);
        Self {
            slopes,
            offsets,
            lipschitz,
        }
    }

    pub fn slopes(&self) -> &Matrix {
        &self.slopes
    }

    pub fn offsets(&self) -> &Vector {
        &self.offsets
    }

    /// Value and the lowest index attaining it.
    fn active_piece(&self, x: &Vector) -> (f64, usize) {
        let values = &self.slopes * x + &self.offsets;
        let mut best = (values[0], 0);
        for (i, &v) in values.iter().enumerate().skip(1) {
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }
}

impl NonsmoothOracle for MaxAffine {
    fn value(&self, x: &Vector) -> f64 {
        self.active_piece(x).0
    }

    fn subgradient(&self, x: &Vector) -> Vector {
        let (_, i) = self.active_piece(x);
        self.slopes.row(i).transpose()
    }

    fn value_and_subgradient(&self, x: &Vector) -> (f64, Vector) {
        let (v, i) = self.active_piece(x);
        (v, self.slopes.row(i).transpose())
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroTerm;

impl ProxFriendly for ZeroTerm {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }
    fn prox(&self, center: &Vector, _weight: f64) -> Vector {
        center.clone()
    }
}

/// `h(x) = reg · ‖x‖₁`.
#[derive(Clone, Copy, Debug)]
pub struct L1Norm {
    reg: f64,
}

impl L1Norm {
    pub fn new(reg: f64) -> Self {
        assert!(reg >= 0.0, "l1 weight must be nonnegative");
        Self { reg }
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }
}

impl ProxFriendly for L1Norm {
    fn value(&self, x: &Vector) -> f64 {
        self.reg * x.lp_norm(1)
    }

    fn prox(&self, center: &Vector, weight: f64) -> Vector {
        let t = self.reg * weight;
        center.map(|c| c.signum() * (c.abs() - t).max(0.0))
    }
}

/// Indicator of the Euclidean ball `{x : ‖x‖ ≤ radius}`.
#[derive(Clone, Copy, Debug)]
pub struct BallIndicator {
    radius: f64,
}

impl BallIndicator {
    pub fn new(radius: f64) -> Self {
        assert!(radius > 0.0, "ball radius must be positive");
        Self { radius }
    }
}

impl ProxFriendly for BallIndicator {
    fn value(&self, x: &Vector) -> f64 {
        if x.norm() <= self.radius * (1.0 + FEASIBILITY_SLACK) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox(&self, center: &Vector, _weight: f64) -> Vector {
        let n = center.norm();
        if n <= self.radius {
            center.clone()
        } else {
            center * (self.radius / n)
        }
    }
}

/// Indicator of the box `{x : lower ≤ x ≤ upper}`.
#[derive(Clone, Debug)]
pub struct BoxIndicator {
    lower: Vector,
    upper: Vector,
}

impl BoxIndicator {
    pub fn new(lower: Vector, upper: Vector) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(
            lower.iter().zip(upper.iter()).all(|(l, u)| l <= u),
            "empty box"
        );
        Self { lower, upper }
    }

    pub fn uniform(n: usize, lower: f64, upper: f64) -> Self {
        Self::new(Vector::from_element(n, lower), Vector::from_element(n, upper))
    }
}

impl ProxFriendly for BoxIndicator {
    fn value(&self, x: &Vector) -> f64 {
        let inside = x
            .iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(&v, (&l, &u))| {
                let slack = FEASIBILITY_SLACK * (1.0 + l.abs().max(u.abs()));
                v >= l - slack && v <= u + slack
            });
        if inside {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox(&self, center: &Vector, _weight: f64) -> Vector {
        Vector::from_fn(center.len(), |i, _| {
            center[i].clamp(self.lower[i], self.upper[i])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
        Vector::from_fn(n, |_, _| scale * (rng.random::<f64>() * 2.0 - 1.0))
    }

    fn check_prox(h: &dyn ProxFriendly, n: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let z = random_vec(&mut rng, n, 3.0);
            let c = 0.1 + rng.random::<f64>() * 2.0;
            let p = h.prox(&z, c);
            let at_p = h.value(&p) + (&p - &z).norm_squared() / (2.0 * c);
            assert!(at_p.is_finite(), "prox left the domain");
            for _ in 0..10 {
                let u = random_vec(&mut rng, n, 3.0);
                let at_u = h.value(&u) + (&u - &z).norm_squared() / (2.0 * c);
                assert!(at_u >= at_p - 1e-12 * (1.0 + at_p.abs()));
            }
            let z2 = random_vec(&mut rng, n, 3.0);
            let p2 = h.prox(&z2, c);
            assert!((&p - &p2).norm() <= (&z - &z2).norm() + 1e-12);
        }
    }

    #[test]
    fn prox_variational_inequalities() {
        check_prox(&ZeroTerm, 4, 1);
        check_prox(&L1Norm::new(0.7), 4, 2);
        check_prox(&BallIndicator::new(1.5), 4, 3);
        check_prox(&BoxIndicator::uniform(4, -0.5, 1.0), 4, 4);
    }

    #[test]
    fn maxaffine_tie_breaks_to_lowest_index() {
        let f = MaxAffine::new(
            Matrix::from_row_slice(2, 1, &[1.0, -1.0]),
            Vector::from_vec(vec![0.0, 0.0]),
        );
        let g = f.subgradient(&Vector::from_vec(vec![0.0]));
        assert_eq!(g[0], 1.0);
        assert_eq!(f.value(&Vector::from_vec(vec![-2.0])), 2.0);
        assert_eq!(f.lipschitz(), 1.0);
    }

    #[test]
    fn proximal_subproblem_adds_quadratic() {
        let base: Arc<dyn SmoothOracle> = Arc::new(LeastSquares::new(
            Matrix::from_row_slice(1, 1, &[2.0]),
            Vector::from_vec(vec![4.0]),
        ));
        let sub = ProximalSubproblem::new(base, Vector::from_vec(vec![1.0]), 0.5);
        let x = Vector::from_vec(vec![3.0]);
        // ½(6−4)² + (3−1)²/(2·0.5) = 2 + 4
        assert!((sub.value(&x) - 6.0).abs() < 1e-14);
        // 2·(6−4) + (3−1)/0.5 = 4 + 4
        assert!((sub.gradient(&x)[0] - 8.0).abs() < 1e-14);
        assert!((sub.lipschitz() - 6.0).abs() < 1e-9);
        assert!((sub.strong_convexity() - 6.0).abs() < 1e-8);
    }
}
