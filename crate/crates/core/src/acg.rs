//! Accelerated composite gradient (ACG) for `min ψ = g + h`, where `g` is
//! `μ`-strongly convex and `(L+μ)`-smooth.
//!
//! Besides the iterates, the method maintains a quadratic minorant `Γ_j` of `ψ`
//! whose Hessian is exactly `μI`. Used as the inner solver of restart ACG the
//! minorant yields an ε-subgradient certificate `(v̂_j, ε_j)` for `φ` at `y_j`,
//! which is what the outer loop's relative error test consumes.

use std::sync::Arc;

use crate::problem::{CompositeProblem, ProxFriendly, ProximalSubproblem, SmoothOracle};
use crate::{Error, Result, Vector};

/// `q(u) = constant + ⟨linear, u − center⟩ + (curvature_mu/2)‖u − center‖²`.
///
/// With `center = 0` this is the plain `constant + ⟨linear, u⟩ + (μ/2)‖u‖²`.
/// ACG keeps every model centred at its start point `x_0`, which keeps the
/// constant term small when `‖x_0‖` is large.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticModel {
    pub constant: f64,
    pub linear: Vector,
    pub curvature_mu: f64,
    pub center: Vector,
}

impl QuadraticModel {
    pub fn zero(center: Vector) -> Self {
        let n = center.len();
        Self {
            constant: 0.0,
            linear: Vector::zeros(n),
            curvature_mu: 0.0,
            center,
        }
    }

    pub fn eval(&self, u: &Vector) -> f64 {
        let d = u - &self.center;
        self.constant + self.linear.dot(&d) + 0.5 * self.curvature_mu * d.norm_squared()
    }

    pub fn gradient(&self, u: &Vector) -> Vector {
        &self.linear + (u - &self.center) * self.curvature_mu
    }

    /// `(wa·a + wb·b) / (wa + wb)`; both models must share a center.
    fn weighted_mean(wa: f64, a: &Self, wb: f64, b: &Self) -> Self {
        debug_assert_eq!(a.center, b.center);
        let total = wa + wb;
        Self {
            constant: (wa * a.constant + wb * b.constant) / total,
            linear: (&a.linear * wa + &b.linear * wb) / total,
            curvature_mu: (wa * a.curvature_mu + wb * b.curvature_mu) / total,
            center: a.center.clone(),
        }
    }
}

/// Minimizer of `A·Γ(u) + ½‖u − x0‖²`; returns `x0` when `A = 0`.
pub fn gamma_argmin_regularized(gamma: &QuadraticModel, a: f64, x0: &Vector) -> Vector {
    if a == 0.0 {
        return x0.clone();
    }
    // (Aμ + 1) u = x0 − A·linear + Aμ·center
    let rhs = x0 - &gamma.linear * a + &gamma.center * (a * gamma.curvature_mu);
    rhs / (a * gamma.curvature_mu + 1.0)
}

/// Unconstrained minimizer of `Γ`.
pub fn gamma_argmin(gamma: &QuadraticModel) -> Result<Vector> {
    if !(gamma.curvature_mu > 0.0) {
        return Err(Error::Domain(
            "quadratic model with zero curvature has no minimizer".into(),
        ));
    }
    Ok(&gamma.center - &gamma.linear / gamma.curvature_mu)
}

#[derive(Clone, Debug)]
pub struct AcgParams {
    /// `g` is `(L + μ)`-smooth.
    pub l: f64,
    /// Strong convexity of `g`.
    pub mu: f64,
    pub x0: Vector,
    /// Outer stepsize; the certificate assumes `ψ = φ + ‖· − x0‖²/(2λ)`.
    pub lam: f64,
    pub sigma: f64,
    pub max_inner: usize,
    pub abs_residual_tol: f64,
}

impl AcgParams {
    pub const DEFAULT_SIGMA: f64 = 0.9;
    pub const DEFAULT_MAX_INNER: usize = 100_000;

    /// Parameters for the proximal subproblem `min φ + ‖· − z̃‖²/(2λ)` of a
    /// smooth problem with gradient Lipschitz constant `l_f`: `L = l_f`, `μ = 1/λ`.
    pub fn for_subproblem(l_f: f64, lam: f64, z_tilde: Vector, sigma: f64, max_inner: usize) -> Self {
        let abs_residual_tol = default_abs_residual_tol(&z_tilde);
        Self {
            l: l_f,
            mu: 1.0 / lam,
            x0: z_tilde,
            lam,
            sigma,
            max_inner,
            abs_residual_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::invalid(format!("L must be positive, got {}", self.l)));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::invalid(format!("mu must be >= 0, got {}", self.mu)));
        }
        if !(self.lam > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive, got {}", self.lam)));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::invalid(format!(
                "sigma must lie in (0,1), got {}",
                self.sigma
            )));
        }
        if self.max_inner == 0 {
            return Err(Error::invalid("max_inner must be >= 1"));
        }
        if !(self.abs_residual_tol >= 0.0) {
            return Err(Error::invalid("abs_residual_tol must be >= 0"));
        }
        Ok(())
    }
}

/// `1e-24 · (1 + ‖z̃‖²)`.
pub fn default_abs_residual_tol(z_tilde: &Vector) -> f64 {
    1e-24 * (1.0 + z_tilde.norm_squared())
}

#[derive(Clone, Debug)]
pub struct AcgState {
    pub j: usize,
    /// `A_j`
    pub a_total: f64,
    /// `τ_j`
    pub tau: f64,
    pub x: Vector,
    pub y: Vector,
    /// `Γ_j`, centred at `x_0`.
    pub gamma: QuadraticModel,
    pub psi_at_y: f64,
    /// Evaluations of `g` (each one `f` oracle call).
    pub oracle_calls: usize,
    pub prox_calls: usize,
}

/// `A_0 = 0`, `τ_0 = 1/L`, `y_0 = x_0`, `Γ_0 ≡ 0`. Evaluates `ψ(x_0)` once.
pub fn acg_init(params: &AcgParams, g: &dyn SmoothOracle, h: &dyn ProxFriendly) -> AcgState {
    let x0 = params.x0.clone();
    let psi = g.value(&x0) + h.value(&x0);
    AcgState {
        j: 0,
        a_total: 0.0,
        tau: 1.0 / params.l,
        gamma: QuadraticModel::zero(x0.clone()),
        x: x0.clone(),
        y: x0,
        psi_at_y: psi,
        oracle_calls: 1,
        prox_calls: 0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    /// `a_j`
    pub a: f64,
    /// `A_{j+1}`
    pub a_next_total: f64,
    /// `τ_{j+1}`
    pub tau_next: f64,
    /// `x̃_j`
    pub x_tilde: Vector,
}

/// `a_j` is the positive root of `a² − τ_j a − τ_j A_j = 0`.
pub fn acg_coefficients(state: &AcgState, params: &AcgParams) -> Coefficients {
    let (tau, big_a) = (state.tau, state.a_total);
    let a = (tau + (tau * tau + 4.0 * tau * big_a).sqrt()) / 2.0;
    let a_next_total = big_a + a;
    let tau_next = tau + params.mu * a / params.l;
    let x_tilde = (&state.y * big_a + &state.x * a) / a_next_total;
    Coefficients {
        a,
        a_next_total,
        tau_next,
        x_tilde,
    }
}

/// Everything computed inside one ACG step, kept for invariant checks.
#[derive(Clone, Debug)]
pub struct AcgStepRecord {
    /// Index of the state the step started from.
    pub j: usize,
    /// `A_j`
    pub a_total: f64,
    /// `τ_j`
    pub tau: f64,
    pub coefficients: Coefficients,
    pub x_prev: Vector,
    pub y_prev: Vector,
    pub psi_at_y_prev: f64,
    pub gamma_prev: QuadraticModel,
    pub g_at_x_tilde: f64,
    pub grad_at_x_tilde: Vector,
    /// `ỹ_{j+1}`
    pub y_tilde: Vector,
    pub h_at_y_tilde: f64,
    pub psi_at_y_tilde: f64,
    /// `γ_j`, centred at `x_0`.
    pub gamma_step: QuadraticModel,
}

impl AcgStepRecord {
    /// `γ̃_j(u) = ℓ_g(u; x̃_j) + h(u) + (μ/2)‖u − x̃_j‖²`, given `h(u)`.
    pub fn gamma_tilde(&self, u: &Vector, h_at_u: f64, mu: f64) -> f64 {
        let x_tilde = &self.coefficients.x_tilde;
        let d = u - x_tilde;
        self.g_at_x_tilde + self.grad_at_x_tilde.dot(&d) + h_at_u + 0.5 * mu * d.norm_squared()
    }
}

/// One ACG iteration: prox-gradient step from `x̃_j`, best-of-two update of
/// `y`, closed-form update of `x`, and the minorant recursion for `Γ`.
pub fn acg_step(
    state: &mut AcgState,
    params: &AcgParams,
    g: &dyn SmoothOracle,
    h: &dyn ProxFriendly,
) -> AcgStepRecord {
    let coeffs = acg_coefficients(state, params);
    let (l, mu) = (params.l, params.mu);
    let lpm = l + mu;
    let x_tilde = &coeffs.x_tilde;

    let (g_xt, grad_xt) = g.value_and_gradient(x_tilde);
    let y_tilde = h.prox(&(x_tilde - &grad_xt / lpm), 1.0 / lpm);
    let h_yt = h.value(&y_tilde);
    let psi_yt = g.value(&y_tilde) + h_yt;
    state.oracle_calls += 2;
    state.prox_calls += 1;

    let step = y_tilde.clone() - x_tilde;
    let gamma_tilde_at_yt =
        g_xt + grad_xt.dot(&step) + h_yt + 0.5 * mu * step.norm_squared();

    // γ_j(u) = γ̃_j(ỹ) + L⟨x̃ − ỹ, u − ỹ⟩ + (μ/2)‖u − ỹ‖², rewritten around x_0
    let slope = (x_tilde - &y_tilde) * l;
    let offset = &y_tilde - &params.x0;
    let gamma_step = QuadraticModel {
        constant: gamma_tilde_at_yt - slope.dot(&offset) + 0.5 * mu * offset.norm_squared(),
        linear: &slope - &offset * mu,
        curvature_mu: mu,
        center: params.x0.clone(),
    };

    let (a, a_next) = (coeffs.a, coeffs.a_next_total);
    let x_next = (&y_tilde * (lpm * a) - &state.y * (state.a_total * a * l / a_next))
        / (a_next * mu + 1.0);
    let mut gamma_next =
        QuadraticModel::weighted_mean(state.a_total, &state.gamma, a, &gamma_step);
    gamma_next.curvature_mu = mu;

    let record = AcgStepRecord {
        j: state.j,
        a_total: state.a_total,
        tau: state.tau,
        x_prev: state.x.clone(),
        y_prev: state.y.clone(),
        psi_at_y_prev: state.psi_at_y,
        gamma_prev: state.gamma.clone(),
        g_at_x_tilde: g_xt,
        grad_at_x_tilde: grad_xt,
        y_tilde: y_tilde.clone(),
        h_at_y_tilde: h_yt,
        psi_at_y_tilde: psi_yt,
        gamma_step,
        coefficients: coeffs.clone(),
    };

    // ties go to ỹ
    if psi_yt <= state.psi_at_y {
        state.y = y_tilde;
        state.psi_at_y = psi_yt;
    }
    state.x = x_next;
    state.gamma = gamma_next;
    state.a_total = a_next;
    state.tau = coeffs.tau_next;
    state.j += 1;
    record
}

/// ε-subgradient certificate for `φ` at `y_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub v: Vector,
    pub v_hat: Vector,
    /// Raw `ε_j`; may be a rounding-level negative number.
    pub eps: f64,
    /// `‖λv̂_j + y_j − x_0‖²`
    pub residual_sq: f64,
    /// `σ‖x_0 − y_j‖²`
    pub rhs_sq: f64,
    /// `Γ_j(x_j)`
    pub gamma_at_x: f64,
}

impl Certificate {
    /// Left side of the relative error test with `ε` clipped at zero.
    pub fn criterion_lhs(&self, lam: f64) -> f64 {
        self.residual_sq + 2.0 * lam * self.eps.max(0.0)
    }
}

/// `v_j = (x_0 − x_j)/A_j`, `v̂_j = v_j + (x_0 − x_j)/λ`,
/// `ε_j = φ(y_j) − φ_j(x_j) − ⟨v̂_j, y_j − x_j⟩` with `φ_j = Γ_j − ‖· − x_0‖²/(2λ)`.
pub fn compute_certificate(
    state: &AcgState,
    params: &AcgParams,
    phi_value_at_y: f64,
) -> Result<Certificate> {
    if !(state.a_total > 0.0) {
        return Err(Error::Domain("certificate needs A_j > 0".into()));
    }
    let lam = params.lam;
    let x0 = &params.x0;
    let dx = x0 - &state.x;
    let v = &dx / state.a_total;
    let v_hat = &v + &dx / lam;
    let gamma_at_x = state.gamma.eval(&state.x);
    let phi_j_at_x = gamma_at_x - dx.norm_squared() / (2.0 * lam);
    let eps = phi_value_at_y - phi_j_at_x - v_hat.dot(&(&state.y - &state.x));
    let residual_sq = (&v_hat * lam + &state.y - x0).norm_squared();
    let rhs_sq = params.sigma * (x0 - &state.y).norm_squared();
    Ok(Certificate {
        v,
        v_hat,
        eps,
        residual_sq,
        rhs_sq,
        gamma_at_x,
    })
}

/// Receives every inner step of [`acg_solve_subproblem`].
pub trait AcgObserver {
    fn on_step(
        &mut self,
        _params: &AcgParams,
        _record: &AcgStepRecord,
        _state: &AcgState,
        _certificate: &Certificate,
    ) {
    }
}

impl AcgObserver for () {}

#[derive(Clone, Debug)]
pub struct SubproblemSolution {
    /// `w̃ = y_j`
    pub w_tilde: Vector,
    /// `u = v̂_j`
    pub u: Vector,
    /// `η = max(ε_j, 0)`
    pub eta: f64,
    pub phi_at_w_tilde: f64,
    pub certificate: Certificate,
    pub inner_iters: usize,
    pub oracle_calls: usize,
    pub prox_calls: usize,
    /// The absolute guard fired instead of the relative test.
    pub via_guard: bool,
}

/// Runs ACG on `ψ = φ + ‖· − z̃‖²/(2λ)` until
/// `‖λv̂_j + y_j − z̃‖² + 2λε_j ≤ σ‖z̃ − y_j‖²` (or the absolute guard fires).
pub fn acg_solve_subproblem(
    problem: &CompositeProblem,
    z_tilde: &Vector,
    params: &AcgParams,
    observer: &mut dyn AcgObserver,
) -> Result<SubproblemSolution> {
    params.validate()?;
    problem.check_dim(z_tilde)?;
    if &params.x0 != z_tilde {
        return Err(Error::invalid("AcgParams::x0 must equal the prox center"));
    }
    let f: Arc<dyn SmoothOracle> = problem.smooth_arc()?;
    let g = ProximalSubproblem::new(f, z_tilde.clone(), params.lam);
    let h = problem.h();
    let lam = params.lam;

    let mut state = acg_init(params, &g, h);
    let mut best: Option<(f64, Certificate)> = None;
    for _ in 0..params.max_inner {
        let record = acg_step(&mut state, params, &g, h);
        let phi_y = state.psi_at_y - (&state.y - z_tilde).norm_squared() / (2.0 * lam);
        let cert = compute_certificate(&state, params, phi_y)?;
        observer.on_step(params, &record, &state, &cert);

        let lhs = cert.criterion_lhs(lam);
        // a zero right side is the degenerate fixed-point case, owned by the guard
        let relative_ok = lhs <= cert.rhs_sq && cert.rhs_sq > params.abs_residual_tol;
        let guard_ok = lhs <= params.abs_residual_tol;
        if relative_ok || guard_ok {
            return Ok(SubproblemSolution {
                w_tilde: state.y.clone(),
                u: cert.v_hat.clone(),
                eta: cert.eps.max(0.0),
                phi_at_w_tilde: phi_y,
                inner_iters: state.j,
                oracle_calls: state.oracle_calls,
                prox_calls: state.prox_calls,
                via_guard: !relative_ok,
                certificate: cert,
            });
        }
        let excess = lhs - cert.rhs_sq;
        if best.as_ref().map_or(true, |(b, _)| excess < *b) {
            best = Some((excess, cert));
        }
    }
    let (best_excess, best) = best.expect("max_inner >= 1");
    Err(Error::InnerBudgetExhausted {
        iterations: params.max_inner,
        best_excess,
        best: Box::new(best),
    })
}

/// `ceil(min{2√(6λL), (½ + √(λL))·ln(6λL)})`, the worst-case inner count.
pub fn inner_iteration_bound(lam: f64, l: f64) -> usize {
    let prod = lam * l;
    let sqrt_branch = 2.0 * (6.0 * prod).sqrt();
    let log_branch = (0.5 + prod.sqrt()) * (6.0 * prod).ln();
    sqrt_branch.min(log_branch).ceil() as usize
}

/// `max{ j²/(4L), (1/L)(1 + √μ/(2√L))^{2(j−1)} }` for `j ≥ 1`.
pub fn a_growth_lower_bound(j: usize, l: f64, mu: f64) -> f64 {
    let jf = j as f64;
    let quadratic = jf * jf / (4.0 * l);
    let geometric = (1.0 / l) * (1.0 + mu.sqrt() / (2.0 * l.sqrt())).powf(2.0 * (jf - 1.0));
    quadratic.max(geometric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{lasso_from_data, make_lasso, LeastSquares, ZeroTerm};
    use crate::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(l: f64, mu: f64, x0: Vector) -> AcgParams {
        AcgParams {
            l,
            mu,
            abs_residual_tol: default_abs_residual_tol(&x0),
            x0,
            lam: if mu > 0.0 { 1.0 / mu } else { 1.0 },
            sigma: 0.9,
            max_inner: 1000,
        }
    }

    #[test]
    fn init_sets_degenerate_start() {
        let g = LeastSquares::new(Matrix::identity(2, 2), Vector::zeros(2));
        let x0 = Vector::from_vec(vec![1.5, -2.0]);
        let p = params(2.0, 0.0, x0.clone());
        let s = acg_init(&p, &g, &ZeroTerm);
        assert_eq!(s.tau, 0.5);
        assert_eq!(s.a_total, 0.0);
        assert_eq!(s.y, x0);
        assert_eq!(gamma_argmin_regularized(&s.gamma, s.a_total, &x0), x0);
        assert_eq!(s.gamma.eval(&Vector::from_vec(vec![9.0, 9.0])), 0.0);

        let p1 = params(1.0, 0.0, x0);
        let s1 = acg_init(&p1, &g, &ZeroTerm);
        assert_eq!(s1.tau, (1.0 + p1.mu * s1.a_total) / p1.l);
    }

    #[test]
    fn first_coefficients_collapse() {
        let g = LeastSquares::new(Matrix::identity(1, 1), Vector::zeros(1));
        let x0 = Vector::from_vec(vec![0.3]);
        let p = params(4.0, 0.0, x0.clone());
        let s = acg_init(&p, &g, &ZeroTerm);
        let c = acg_coefficients(&s, &p);
        assert_eq!(c.a, 0.25);
        assert_eq!(c.a_next_total, 0.25);
        assert_eq!(c.x_tilde, x0);
    }

    #[test]
    fn second_coefficients_golden_ratio() {
        let x0 = Vector::zeros(1);
        let p = params(1.0, 0.0, x0.clone());
        let s = AcgState {
            j: 1,
            a_total: 1.0,
            tau: 1.0,
            x: x0.clone(),
            y: x0.clone(),
            gamma: QuadraticModel::zero(x0),
            psi_at_y: 0.0,
            oracle_calls: 0,
            prox_calls: 0,
        };
        let c = acg_coefficients(&s, &p);
        let sqrt5 = 5f64.sqrt();
        assert!((c.a - (1.0 + sqrt5) / 2.0).abs() < 1e-15);
        assert!((c.a_next_total - (3.0 + sqrt5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn coefficient_root_property_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let l = 0.1 + 10.0 * rng.random::<f64>();
            let mu = 5.0 * rng.random::<f64>();
            let big_a = 100.0 * rng.random::<f64>();
            let x0 = Vector::zeros(1);
            let p = params(l, mu, x0.clone());
            let s = AcgState {
                j: 3,
                a_total: big_a,
                tau: (1.0 + mu * big_a) / l,
                x: x0.clone(),
                y: x0.clone(),
                gamma: QuadraticModel::zero(x0),
                psi_at_y: 0.0,
                oracle_calls: 0,
                prox_calls: 0,
            };
            let c = acg_coefficients(&s, &p);
            let resid = c.a * c.a - s.tau * c.a - s.tau * big_a;
            assert!(resid.abs() <= 1e-12 * (c.a * c.a).max(1.0));
            assert!(c.a > 0.0);
        }
    }

    #[test]
    fn one_gradient_step_in_one_dimension() {
        // f = ½(x − 1)², μ = 0, L = 1, x0 = 0
        let g = LeastSquares::new(Matrix::identity(1, 1), Vector::from_vec(vec![1.0]));
        let p = params(1.0, 0.0, Vector::zeros(1));
        let mut s = acg_init(&p, &g, &ZeroTerm);
        let rec = acg_step(&mut s, &p, &g, &ZeroTerm);
        assert!((rec.y_tilde[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.y, rec.y_tilde);
        assert_eq!(s.oracle_calls, 3);
        assert_eq!(s.prox_calls, 1);
    }

    #[test]
    fn fixed_point_at_optimum() {
        // g = ½‖x‖² + ‖x‖²/(2λ) with μ = 1/λ, started at its minimizer
        let lam = 0.5;
        let f: Arc<dyn SmoothOracle> =
            Arc::new(LeastSquares::new(Matrix::identity(3, 3), Vector::zeros(3)));
        let x0 = Vector::zeros(3);
        let g = ProximalSubproblem::new(f, x0.clone(), lam);
        let p = AcgParams::for_subproblem(1.0, lam, x0.clone(), 0.9, 10);
        let mut s = acg_init(&p, &g, &ZeroTerm);
        let psi0 = s.psi_at_y;
        acg_step(&mut s, &p, &g, &ZeroTerm);
        assert_eq!(s.x, x0);
        assert_eq!(s.y, x0);
        assert_eq!(s.psi_at_y, psi0);
    }

    #[test]
    fn gamma_argmin_examples() {
        let origin = Vector::zeros(2);
        let q = QuadraticModel {
            constant: 0.0,
            linear: Vector::zeros(2),
            curvature_mu: 1.0,
            center: origin.clone(),
        };
        let x0 = Vector::from_vec(vec![2.0, 0.0]);
        assert_eq!(gamma_argmin_regularized(&q, 0.0, &x0), x0);
        assert_eq!(
            gamma_argmin_regularized(&q, 1.0, &x0),
            Vector::from_vec(vec![1.0, 0.0])
        );
        assert_eq!(gamma_argmin(&q).unwrap(), origin);

        let q2 = QuadraticModel {
            constant: 1.0,
            linear: Vector::from_vec(vec![2.0, 0.0]),
            curvature_mu: 1.0,
            center: origin.clone(),
        };
        assert_eq!(gamma_argmin(&q2).unwrap(), Vector::from_vec(vec![-2.0, 0.0]));

        let flat = QuadraticModel::zero(origin);
        assert!(matches!(gamma_argmin(&flat), Err(Error::Domain(_))));
    }

    #[test]
    fn certificate_requires_positive_a() {
        let g = LeastSquares::new(Matrix::identity(1, 1), Vector::zeros(1));
        let p = params(1.0, 1.0, Vector::zeros(1));
        let s = acg_init(&p, &g, &ZeroTerm);
        assert!(matches!(
            compute_certificate(&s, &p, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn certificate_at_exact_optimum_is_zero_displacement() {
        let problem = lasso_from_data(
            Matrix::from_row_slice(1, 1, &[2.0]),
            Vector::from_vec(vec![4.0]),
            0.0,
        );
        let z = Vector::from_vec(vec![2.0]);
        let lam = 1.0;
        let p = AcgParams::for_subproblem(problem.lipschitz(), lam, z.clone(), 0.9, 50);
        let sol = acg_solve_subproblem(&problem, &z, &p, &mut ()).unwrap();
        assert_eq!(sol.inner_iters, 1);
        assert!(sol.via_guard);
        assert_eq!(sol.u, Vector::zeros(1));
        assert_eq!(sol.certificate.v, Vector::zeros(1));
        assert!(sol.eta.abs() < 1e-15);
        assert_eq!(sol.w_tilde, z);
    }

    #[test]
    fn x_recursion_matches_closed_form_argmin() {
        let problem = make_lasso(21, 30, 15, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = Vector::from_fn(15, |_, _| rng.random::<f64>() - 0.5);
        let lam = 3.0 / problem.lipschitz();
        let p = AcgParams::for_subproblem(problem.lipschitz(), lam, z.clone(), 0.9, 100);
        let f = problem.smooth_arc().unwrap();
        let g = ProximalSubproblem::new(f, z.clone(), lam);
        let mut s = acg_init(&p, &g, problem.h());
        for _ in 0..100 {
            acg_step(&mut s, &p, &g, problem.h());
            let closed = gamma_argmin_regularized(&s.gamma, s.a_total, &z);
            assert!((&closed - &s.x).norm() <= 1e-8 * (1.0 + s.x.norm()));
            assert!((s.tau - (1.0 + p.mu * s.a_total) / p.l).abs() <= 1e-10 * s.tau);
        }
    }

    #[test]
    fn psi_is_monotone_along_runs() {
        for seed in 0..50 {
            let problem = make_lasso(seed, 12, 6, 0.1).unwrap();
            let z = Vector::from_element(6, 0.3);
            let lam = 5.0 / problem.lipschitz();
            let p = AcgParams::for_subproblem(problem.lipschitz(), lam, z.clone(), 0.9, 30);
            let g = ProximalSubproblem::new(problem.smooth_arc().unwrap(), z, lam);
            let mut s = acg_init(&p, &g, problem.h());
            for _ in 0..30 {
                let before = s.psi_at_y;
                acg_step(&mut s, &p, &g, problem.h());
                assert!(s.psi_at_y <= before);
            }
        }
    }

    #[test]
    fn lemma_bound_on_minorant_gap() {
        // ψ(y_j) − Γ_j(x̂_j) ≤ ‖x̂_j − x_0‖²/(2A_j) whenever A_j ≥ 3λ
        let problem = make_lasso(8, 40, 20, 0.1).unwrap();
        let z = Vector::from_element(20, -0.2);
        let lam = 10.0 / problem.lipschitz();
        let p = AcgParams::for_subproblem(problem.lipschitz(), lam, z.clone(), 0.9, 60);
        let g = ProximalSubproblem::new(problem.smooth_arc().unwrap(), z.clone(), lam);
        let mut s = acg_init(&p, &g, problem.h());
        let mut checked = 0;
        for _ in 0..60 {
            acg_step(&mut s, &p, &g, problem.h());
            if s.a_total >= 3.0 * lam {
                let xhat = gamma_argmin(&s.gamma).unwrap();
                let lhs = s.psi_at_y - s.gamma.eval(&xhat);
                let rhs = (&xhat - &z).norm_squared() / (2.0 * s.a_total);
                assert!(lhs <= rhs + 1e-10 * (1.0 + s.psi_at_y.abs()));
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn subproblem_triple_is_sampled_subgradient() {
        let problem = make_lasso(3, 30, 12, 0.1).unwrap();
        let z = Vector::from_element(12, 0.5);
        let lam = 4.0 / problem.lipschitz();
        let p = AcgParams::for_subproblem(problem.lipschitz(), lam, z.clone(), 0.9, 500);
        let sol = acg_solve_subproblem(&problem, &z, &p, &mut ()).unwrap();
        assert!(sol.certificate.criterion_lhs(lam) <= sol.certificate.rhs_sq);
        assert!(sol.inner_iters <= inner_iteration_bound(lam, problem.lipschitz()));
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let phi_w = problem.objective(&sol.w_tilde);
        for _ in 0..20 {
            let u = &sol.w_tilde + Vector::from_fn(12, |_, _| 2.0 * rng.random::<f64>() - 1.0);
            let phi_u = problem.objective(&u);
            let lower = phi_w + sol.u.dot(&(&u - &sol.w_tilde)) - sol.eta;
            assert!(phi_u >= lower - 1e-9 * (1.0 + phi_u.abs()));
        }
    }

    #[test]
    fn budget_failure_carries_certificate() {
        let problem = make_lasso(3, 30, 12, 0.1).unwrap();
        let z = Vector::from_element(12, 0.5);
        let lam = 1e4 / problem.lipschitz();
        let p = AcgParams::for_subproblem(problem.lipschitz(), lam, z.clone(), 0.9, 2);
        match acg_solve_subproblem(&problem, &z, &p, &mut ()) {
            Err(Error::InnerBudgetExhausted { iterations, best, .. }) => {
                assert_eq!(iterations, 2);
                assert!(best.rhs_sq >= 0.0);
            }
            other => panic!("expected budget failure, got {other:?}"),
        }
    }

    #[test]
    fn inner_bound_values() {
        assert_eq!(inner_iteration_bound(1.0, 1.0), 3);
        assert_eq!(inner_iteration_bound(10.0, 1.0), 15);
        // at λL = 100 the square-root branch is smaller
        assert_eq!(inner_iteration_bound(100.0, 1.0), 49);
    }

    #[test]
    fn params_validation() {
        let mut p = params(1.0, 0.0, Vector::zeros(1));
        assert!(p.validate().is_ok());
        p.sigma = 1.0;
        assert!(p.validate().is_err());
        p.sigma = 0.5;
        p.l = 0.0;
        assert!(p.validate().is_err());
    }
}
