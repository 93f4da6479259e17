//! Invariant checks over instrumented runs.
//!
//! Each check reports a slack that is nonnegative when the invariant holds;
//! relative checks divide by the sum of the magnitudes of the terms involved.
//! A [`VerifyReport`] keeps the worst slack and the failure count per check.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::acg::{
    a_growth_lower_bound, gamma_argmin_regularized, inner_iteration_bound, AcgParams, AcgState,
    AcgStepRecord, Certificate,
};
use crate::bundle::{hpe_solve, Bundle, BundleObserver, HpeConfig, HpeOuterRecord, MpbInnerRecord};
use crate::hpe::{sampled_subgradient_slack, HpeTriple};
use crate::problem::{
    reference_solve_uncached, CompositeProblem, ProxFriendly, ProximalSubproblem,
};
use crate::restart::{self, OuterRecord, RestartConfig, RestartObserver};
use crate::{Result, Vector};

pub const IDENTITY_RTOL: f64 = 1e-8;
pub const MINORANT_RTOL: f64 = 1e-9;
pub const GROWTH_SLACK: f64 = 1e-12;
pub const OUTER_QUADRATIC_RTOL: f64 = 1e-12;
pub const WEAK_DUALITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub evaluations: usize,
    pub failures: usize,
    pub worst_slack: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    checks: BTreeMap<String, CheckResult>,
}

impl VerifyReport {
    /// Record one evaluation; `slack < 0` (or NaN) is a failure.
    pub fn record(&mut self, name: &str, slack: f64) {
        let entry = self
            .checks
            .entry(name.to_string())
            .or_insert_with(|| CheckResult {
                name: name.to_string(),
                evaluations: 0,
                failures: 0,
                worst_slack: f64::INFINITY,
            });
        entry.evaluations += 1;
        if !(slack >= 0.0) {
            entry.failures += 1;
        }
        if slack.is_nan() || slack < entry.worst_slack {
            entry.worst_slack = slack;
        }
    }

    pub fn merge(&mut self, other: VerifyReport) {
        for (name, c) in other.checks {
            match self.checks.get_mut(&name) {
                Some(e) => {
                    e.evaluations += c.evaluations;
                    e.failures += c.failures;
                    if c.worst_slack.is_nan() || c.worst_slack < e.worst_slack {
                        e.worst_slack = c.worst_slack;
                    }
                }
                None => {
                    self.checks.insert(name, c);
                }
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.get(name)
    }

    pub fn checks(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.values()
    }

    pub fn all_passed(&self) -> bool {
        self.checks.values().all(CheckResult::passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.checks.values() {
            writeln!(
                f,
                "{} {:<32} evaluations={:<7} failures={:<5} worst_slack={:.3e}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.evaluations,
                c.failures,
                c.worst_slack
            )?;
        }
        Ok(())
    }
}

/// `rtol − |a − b|/(|a| + |b|)`, exact equality counting as a pass.
pub fn relative_slack(a: f64, b: f64, rtol: f64) -> f64 {
    let scale = a.abs() + b.abs();
    if a == b {
        return rtol;
    }
    rtol - (a - b).abs() / scale
}

/// `(rhs − lhs)/(1 + |lhs| + |rhs|) + tol` for `lhs ≤ rhs` with scaled tolerance.
pub fn inequality_slack(lhs: f64, rhs: f64, tol: f64) -> f64 {
    if lhs == f64::NEG_INFINITY || rhs == f64::INFINITY {
        return tol;
    }
    (rhs - lhs) / (1.0 + lhs.abs() + rhs.abs()) + tol
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random points per inner step for the sampled minorant checks.
    pub samples_per_step: usize,
    pub subgradient_samples: usize,
    /// Outer steps (the first ones) that get a nested high-accuracy subproblem solve.
    pub nested_steps: usize,
    pub nested_tol: f64,
    pub phi_ref: Option<f64>,
    pub d0: Option<f64>,
    /// Additive tolerance of the outer rate check.
    pub rate_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            samples_per_step: 3,
            subgradient_samples: 20,
            nested_steps: 5,
            nested_tol: 1e-10,
            phi_ref: None,
            d0: None,
            rate_tol: 1e-9,
        }
    }
}

fn sample_point<R: Rng>(rng: &mut R, around: &Vector, i: usize) -> Vector {
    let radius = 10f64.powi((i % 4) as i32 - 2);
    around + Vector::from_fn(around.len(), |_, _| rng.sample::<f64, _>(StandardNormal)) * radius
}

/// Checks for one ACG step; usable directly on hand-made records.
pub fn check_acg_step(
    report: &mut VerifyReport,
    problem: &CompositeProblem,
    params: &AcgParams,
    record: &AcgStepRecord,
    state: &AcgState,
    cert: &Certificate,
    samples: usize,
    rng: &mut ChaCha8Rng,
) {
    let (l, mu, lam) = (params.l, params.mu, params.lam);
    let x0 = &params.x0;
    let c = &record.coefficients;

    report.record(
        "acg.tau_identity",
        relative_slack(record.tau, (1.0 + mu * record.a_total) / l, IDENTITY_RTOL),
    );
    report.record(
        "acg.a_quadratic",
        relative_slack(c.a_next_total * record.tau, c.a * c.a, IDENTITY_RTOL),
    );
    let bound = a_growth_lower_bound(state.j, l, mu);
    report.record(
        "acg.a_growth",
        (state.a_total - bound) / bound + GROWTH_SLACK,
    );
    let closed = gamma_argmin_regularized(&state.gamma, state.a_total, x0);
    report.record(
        "acg.x_closed_form",
        IDENTITY_RTOL - (&closed - &state.x).norm() / (closed.norm() + state.x.norm()).max(1e-300),
    );
    report.record(
        "acg.psi_monotone",
        record.psi_at_y_prev - state.psi_at_y,
    );

    // v_j = ∇Γ_j(x_j) and ε_j recomputed from φ directly
    let grad = state.gamma.gradient(&state.x);
    let v_gap = (&grad - &cert.v).norm() / (grad.norm() + cert.v.norm()).max(1e-300);
    report.record("acg.certificate_v", IDENTITY_RTOL - if grad == cert.v { 0.0 } else { v_gap });
    let phi_y = problem.objective(&state.y);
    let dx = x0 - &state.x;
    let gamma_x = state.gamma.eval(&state.x);
    let coupling = cert.v_hat.dot(&(&state.y - &state.x));
    let sq = dx.norm_squared() / (2.0 * lam);
    let eps = phi_y - gamma_x + sq - coupling;
    let scale = phi_y.abs() + gamma_x.abs() + sq + coupling.abs();
    report.record(
        "acg.certificate_eps",
        IDENTITY_RTOL - (eps - cert.eps).abs() / scale.max(1e-300),
    );

    // ‖λv̂ + y − x_0‖² + 2λε = ‖λv‖² + 2λ[ψ(y) − Γ(x)]
    let left_sq = (&cert.v_hat * lam + &state.y - x0).norm_squared();
    let right_sq = (&cert.v * lam).norm_squared();
    let left = left_sq + 2.0 * lam * eps;
    let right = right_sq + 2.0 * lam * (state.psi_at_y - gamma_x);
    let scale = left_sq + right_sq + 2.0 * lam * (eps.abs() + state.psi_at_y.abs() + gamma_x.abs());
    report.record(
        "acg.certificate_identity",
        IDENTITY_RTOL - (left - right).abs() / scale.max(1e-300),
    );

    // A_j ψ(y_j) ≤ min {A_jΓ_j + ½‖·−x_0‖²}
    let lhs = state.a_total * state.psi_at_y;
    let rhs = state.a_total * gamma_x + 0.5 * dx.norm_squared();
    report.record("acg.model_min_bound", inequality_slack(lhs, rhs, MINORANT_RTOL));

    let h = problem.h();
    let psi = |u: &Vector| problem.objective(u) + (u - x0).norm_squared() / (2.0 * lam);
    // both prox-linear minima are attained at ỹ
    let x_tilde = &c.x_tilde;
    let y_tilde = &record.y_tilde;
    let floor = record.gamma_step.eval(y_tilde) + 0.5 * l * (y_tilde - x_tilde).norm_squared();
    report.record(
        "acg.gamma_touches_at_y_tilde",
        relative_slack(
            record.gamma_step.eval(y_tilde),
            record.gamma_tilde(y_tilde, record.h_at_y_tilde, mu),
            IDENTITY_RTOL,
        ),
    );
    for i in 0..samples {
        let around = if i % 2 == 0 { &state.y } else { x0 };
        let u = sample_point(rng, around, i);
        let h_u = h.value(&u);
        if h_u == f64::INFINITY {
            continue;
        }
        let psi_u = psi(&u);
        let g_step = record.gamma_step.eval(&u);
        let g_tilde = record.gamma_tilde(&u, h_u, mu);
        let big_gamma = state.gamma.eval(&u);
        report.record("acg.gamma_below_gamma_tilde", inequality_slack(g_step, g_tilde, MINORANT_RTOL));
        report.record("acg.gamma_tilde_below_psi", inequality_slack(g_tilde, psi_u, MINORANT_RTOL));
        report.record("acg.big_gamma_below_psi", inequality_slack(big_gamma, psi_u, MINORANT_RTOL));
        let prox_term = 0.5 * l * (&u - x_tilde).norm_squared();
        report.record(
            "acg.equal_minima",
            inequality_slack(floor, g_tilde + prox_term, MINORANT_RTOL)
                .min(inequality_slack(floor, g_step + prox_term, MINORANT_RTOL)),
        );
    }
}

fn check_triple(
    report: &mut VerifyReport,
    prefix: &str,
    problem: &CompositeProblem,
    lam: f64,
    triple: &HpeTriple,
    samples: usize,
    rng: &mut ChaCha8Rng,
) {
    report.record(
        &format!("{prefix}.hpe_criterion"),
        triple.criterion_rhs - triple.criterion_lhs(lam),
    );
    report.record(&format!("{prefix}.eta_nonnegative"), triple.eta);
    let slack = sampled_subgradient_slack(problem, triple, samples, rng);
    report.record(&format!("{prefix}.subgradient_sampled"), slack + MINORANT_RTOL);
}

/// Observer that checks every ACG step and outer step of a restart ACG run.
pub struct RestartVerifier<'a> {
    problem: &'a CompositeProblem,
    options: VerifyOptions,
    rng: ChaCha8Rng,
    prev_phi: Option<f64>,
    pub report: VerifyReport,
    pub inner_counts: Vec<usize>,
}

impl<'a> RestartVerifier<'a> {
    pub fn new(problem: &'a CompositeProblem, options: VerifyOptions) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(options.seed),
            problem,
            options,
            prev_phi: None,
            report: VerifyReport::default(),
            inner_counts: Vec::new(),
        }
    }

    fn nested_ppm_check(&mut self, record: &OuterRecord) -> Result<()> {
        let f = self.problem.smooth_arc()?;
        let lam = record.lam;
        let z = &record.z_tilde;
        let g = ProximalSubproblem::new(f, z.clone(), lam);
        let sub = CompositeProblem::smooth(Arc::new(g), self.problem.h_arc(), self.problem.dimension());
        let nested = reference_solve_uncached(&sub, self.options.nested_tol)?;
        let z_hat = &nested.x;
        let w = &record.triple.w_tilde;
        let lhs = self.problem.objective(w) + (w - z).norm_squared() / (2.0 * lam)
            - self.problem.objective(z_hat)
            - (z_hat - z).norm_squared() / (2.0 * lam);
        let rhs = record.sigma / (2.0 * lam) * (z - w).norm_squared() + 10.0 * self.options.nested_tol;
        self.report.record("restart.ppm_relative_accuracy", rhs - lhs);
        Ok(())
    }
}

impl RestartObserver for RestartVerifier<'_> {
    fn on_inner_step(
        &mut self,
        _k: usize,
        params: &AcgParams,
        record: &AcgStepRecord,
        state: &AcgState,
        certificate: &Certificate,
    ) {
        let samples = self.options.samples_per_step;
        check_acg_step(
            &mut self.report,
            self.problem,
            params,
            record,
            state,
            certificate,
            samples,
            &mut self.rng,
        );
    }

    fn on_outer_step(&mut self, record: &OuterRecord) {
        let lam = record.lam;
        let b = record.b;
        let resid = b * b - lam * b - lam * record.b_total_prev;
        let scale = b * b + lam * b + lam * record.b_total_prev;
        self.report
            .record("restart.b_quadratic", OUTER_QUADRATIC_RTOL - resid.abs() / scale);
        let kf = record.k as f64;
        let growth = kf * kf * lam / 4.0;
        self.report
            .record("restart.b_growth", (record.b_total - growth) / growth + GROWTH_SLACK);
        if let Some(prev) = self.prev_phi {
            self.report.record("restart.phi_monotone", prev - record.phi_at_w);
        }
        self.prev_phi = Some(record.phi_at_w);
        let samples = self.options.subgradient_samples;
        check_triple(&mut self.report, "restart", self.problem, lam, &record.triple, samples, &mut self.rng);

        let l = self.problem.lipschitz();
        if lam * l >= 1.0 {
            let bound = inner_iteration_bound(lam, l) as f64;
            self.report
                .record("restart.inner_bound", bound - record.inner_iters as f64);
        }
        self.inner_counts.push(record.inner_iters);
        if let (Some(phi_ref), Some(d0)) = (self.options.phi_ref, self.options.d0) {
            let bound = 2.0 * d0 * d0 / (lam * kf * kf);
            self.report.record(
                "restart.outer_rate",
                bound + self.options.rate_tol - (record.phi_at_w - phi_ref),
            );
        }
        if record.k <= self.options.nested_steps {
            if let Err(e) = self.nested_ppm_check(record) {
                log::warn!("nested subproblem solve failed: {e}");
                self.report.record("restart.ppm_relative_accuracy", f64::NAN);
            }
        }
    }
}

/// `h + ‖· − center‖²/(2λ)`; prox in closed form through the prox of `h`.
#[derive(Debug)]
struct ShiftedTerm {
    h: Arc<dyn ProxFriendly>,
    center: Vector,
    lam: f64,
}

impl ProxFriendly for ShiftedTerm {
    fn value(&self, x: &Vector) -> f64 {
        self.h.value(x) + (x - &self.center).norm_squared() / (2.0 * self.lam)
    }

    fn prox(&self, c: &Vector, t: f64) -> Vector {
        let lam = self.lam;
        let merged = (&self.center * t + c * lam) / (lam + t);
        self.h.prox(&merged, lam * t / (lam + t))
    }
}

/// Observer that checks every MPB inner step and HPE outer step.
pub struct BundleVerifier<'a> {
    problem: &'a CompositeProblem,
    options: VerifyOptions,
    rng: ChaCha8Rng,
    prev_best: Option<f64>,
    inner_prev: Option<(usize, f64)>,
    pub report: VerifyReport,
}

impl<'a> BundleVerifier<'a> {
    pub fn new(problem: &'a CompositeProblem, options: VerifyOptions) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(options.seed),
            problem,
            options,
            prev_best: None,
            inner_prev: None,
            report: VerifyReport::default(),
        }
    }

    fn nested_lower_bound_check(&mut self, record: &HpeOuterRecord) -> Result<()> {
        let inner = &record.inner;
        let f = match self.problem.loss() {
            crate::problem::Loss::Nonsmooth(f) => Arc::clone(f),
            crate::problem::Loss::Smooth(_) => unreachable!("bundle runs are nonsmooth"),
        };
        let term = ShiftedTerm {
            h: self.problem.h_arc(),
            center: inner.x0.clone(),
            lam: inner.lam,
        };
        let sub = CompositeProblem::nonsmooth(f, Arc::new(term), self.problem.dimension());
        let nested = reference_solve_uncached(&sub, self.options.nested_tol.max(1e-9))?;
        self.report.record(
            "mpb.m_below_subproblem_min",
            inequality_slack(inner.m_j, nested.value, WEAK_DUALITY_TOL),
        );
        Ok(())
    }
}

impl BundleObserver for BundleVerifier<'_> {
    fn on_inner_step(&mut self, k: usize, record: &MpbInnerRecord, bundle: &Bundle) {
        let mp = &record.model_prox;
        let sum: f64 = mp.theta.iter().sum();
        self.report.record("mpb.theta_simplex", 1e-12 - (sum - 1.0).abs());
        let min_theta = mp.theta.iter().copied().fold(f64::INFINITY, f64::min);
        self.report.record("mpb.theta_nonnegative", min_theta);
        self.report.record(
            "mpb.weak_duality",
            mp.primal_value - mp.m + WEAK_DUALITY_TOL * (1.0 + mp.primal_value.abs()),
        );
        self.report.record(
            "mpb.m_below_psi_tilde",
            inequality_slack(record.m_j, record.psi_at_x_tilde, 0.0),
        );
        match self.inner_prev {
            Some((pk, prev)) if pk == k => {
                self.report
                    .record("mpb.psi_tilde_monotone", prev - record.psi_at_x_tilde);
            }
            _ => {}
        }
        self.inner_prev = Some((k, record.psi_at_x_tilde));

        let (x0, lam) = (&record.x0, record.lam);
        let f_val = |u: &Vector| self.problem.f_value(u);
        for i in 0..self.options.samples_per_step {
            let around = if i % 2 == 0 { &record.x_j } else { x0 };
            let u = sample_point(&mut self.rng, around, i);
            let fu = f_val(&u);
            let last = bundle.cuts().last().expect("nonempty bundle");
            self.report
                .record("mpb.cut_validity", inequality_slack(last.eval(&u), fu, MINORANT_RTOL));
            let psi_u = self.problem.objective(&u) + (&u - x0).norm_squared() / (2.0 * lam);
            if psi_u.is_finite() {
                self.report
                    .record("mpb.m_lower_bound_sampled", inequality_slack(record.m_j, psi_u, MINORANT_RTOL));
            }
        }
        if let Some(last) = bundle.cuts().last() {
            self.report.record(
                "mpb.model_exact_at_anchor",
                relative_slack(bundle.model(&last.anchor), last.value, 1e-12),
            );
        }
    }

    fn on_outer_step(&mut self, record: &HpeOuterRecord) {
        let inner = &record.inner;
        let lam = inner.lam;
        self.report.record("mpb.gap_at_termination", inner.delta - inner.t_j);

        // ε_j rebuilt from the bundle, weights and φ
        let mp = &inner.last_model_prox;
        let aggregate: f64 = inner
            .bundle
            .cuts()
            .iter()
            .zip(&mp.theta)
            .map(|(c, w)| w * c.eval(&inner.x_j))
            .sum();
        let h_xj = self.problem.h().value(&inner.x_j);
        let phi_tilde = self.problem.objective(&inner.x_tilde);
        let u = (&inner.x0 - &inner.x_j) / lam;
        let coupling = u.dot(&(&inner.x_tilde - &inner.x_j));
        let eps = phi_tilde - aggregate - h_xj - coupling;
        let dist = (&inner.x_j - &inner.x_tilde).norm_squared();
        let lhs = dist + 2.0 * lam * eps;
        let rhs = 2.0 * lam * inner.t_j;
        let scale = dist + 2.0 * lam * (phi_tilde.abs() + aggregate.abs() + h_xj.abs() + coupling.abs());
        self.report.record(
            "mpb.certificate_identity",
            IDENTITY_RTOL - (lhs - rhs).abs() / scale.max(1e-300),
        );
        let step = &record.w_prev - &record.triple.u * lam;
        self.report.record(
            "mpb.step_identity",
            1e-12 * (1.0 + record.w_prev.norm()) - (&step - &record.w).norm(),
        );
        let samples = self.options.subgradient_samples;
        check_triple(&mut self.report, "mpb", self.problem, lam, &record.triple, samples, &mut self.rng);
        if let Some(prev) = self.prev_best {
            self.report.record("mpb.best_monotone", prev - record.best_phi);
        }
        self.prev_best = Some(record.best_phi);
        if record.k <= self.options.nested_steps {
            if let Err(e) = self.nested_lower_bound_check(record) {
                log::warn!("nested subproblem solve failed: {e}");
                self.report.record("mpb.m_below_subproblem_min", f64::NAN);
            }
        }
    }
}

/// Runs restart ACG with full instrumentation.
pub fn verify_restart_run(
    problem: &CompositeProblem,
    w0: &Vector,
    lam: f64,
    eps_bar: f64,
    config: &RestartConfig,
    options: VerifyOptions,
) -> Result<(VerifyReport, crate::trace::RunTrace)> {
    let mut verifier = RestartVerifier::new(problem, options);
    let trace = restart::solve(problem, w0, lam, eps_bar, config, &mut verifier)?;
    Ok((verifier.report, trace))
}

/// Runs HPE with MPB inner solves and full instrumentation.
pub fn verify_bundle_run(
    problem: &CompositeProblem,
    w0: &Vector,
    lam: f64,
    delta: f64,
    eps_bar: f64,
    config: &HpeConfig,
    options: VerifyOptions,
) -> Result<(VerifyReport, crate::trace::RunTrace)> {
    let mut verifier = BundleVerifier::new(problem, options);
    let trace = hpe_solve(problem, w0, lam, delta, eps_bar, config, &mut verifier)?;
    Ok((verifier.report, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acg::{acg_init, acg_step, compute_certificate};
    use crate::bundle::default_bundle_lambda;
    use crate::problem::{make_lasso, make_maxaffine, reference_solve};

    #[test]
    fn report_tracks_worst_slack() {
        let mut r = VerifyReport::default();
        r.record("a", 1.0);
        r.record("a", 0.5);
        r.record("b", -1.0);
        assert_eq!(r.get("a").unwrap().worst_slack, 0.5);
        assert!(r.get("a").unwrap().passed());
        assert!(!r.get("b").unwrap().passed());
        assert!(!r.all_passed());
        let text = r.to_string();
        assert!(text.contains("PASS a"));
        assert!(text.contains("FAIL b"));
    }

    #[test]
    fn healthy_restart_run_passes() {
        let p = make_lasso(1, 40, 20, 0.1).unwrap();
        let r = reference_solve(&p, 1e-10).unwrap();
        let w0 = Vector::zeros(20);
        let lam = 10.0 / p.lipschitz();
        let opts = VerifyOptions {
            phi_ref: Some(r.value),
            d0: Some((&w0 - &r.x).norm()),
            nested_steps: 2,
            ..VerifyOptions::default()
        };
        let p = p.with_reference(r.value, Some(r.x));
        let (report, trace) =
            verify_restart_run(&p, &w0, lam, 1e-6, &RestartConfig::default(), opts).unwrap();
        assert!(trace.converged());
        assert!(report.all_passed(), "{report}");
        for name in ["acg.tau_identity", "acg.a_growth", "acg.big_gamma_below_psi", "restart.inner_bound"] {
            assert!(report.get(name).unwrap().evaluations > 0);
        }
    }

    #[test]
    fn corrupted_tau_is_caught() {
        let p = make_lasso(2, 20, 10, 0.1).unwrap();
        let z = Vector::from_element(10, 0.1);
        let lam = 3.0 / p.lipschitz();
        let params = AcgParams::for_subproblem(p.lipschitz(), lam, z.clone(), 0.9, 10);
        let g = ProximalSubproblem::new(p.smooth_arc().unwrap(), z, lam);
        let mut state = acg_init(&params, &g, p.h());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut report = VerifyReport::default();
        for _ in 0..3 {
            let mut rec = acg_step(&mut state, &params, &g, p.h());
            let phi_y = p.objective(&state.y);
            let cert = compute_certificate(&state, &params, phi_y).unwrap();
            rec.tau *= 1.01;
            check_acg_step(&mut report, &p, &params, &rec, &state, &cert, 0, &mut rng);
        }
        assert!(!report.get("acg.tau_identity").unwrap().passed());
        assert!(report.get("acg.psi_monotone").unwrap().passed());
    }

    #[test]
    fn healthy_bundle_run_passes() {
        let p = make_maxaffine(3, 10, 20).unwrap();
        let r = reference_solve(&p, 1e-8).unwrap();
        let p = p.with_reference(r.value, Some(r.x.clone()));
        let w0 = Vector::zeros(20);
        let eps = 1e-2;
        let lam = default_bundle_lambda(p.lipschitz(), (&w0 - &r.x).norm(), eps);
        let opts = VerifyOptions {
            nested_steps: 2,
            ..VerifyOptions::default()
        };
        let (report, trace) =
            verify_bundle_run(&p, &w0, lam, eps / 2.0, eps, &HpeConfig::default(), opts).unwrap();
        assert!(trace.converged(), "{:?}", trace.message);
        assert!(report.all_passed(), "{report}");
        assert!(report.get("mpb.certificate_identity").unwrap().evaluations > 0);
    }
}
