//! Restart ACG: an accelerated inexact proximal-point outer loop whose
//! subproblems `min φ + ‖· − z̃_k‖²/(2λ)` are solved by ACG until the relative
//! error test `‖λu_k + w̃_k − z̃_k‖² + 2λη_k ≤ σ‖z̃_k − w̃_k‖²` holds.

use log::warn;

use crate::acg::{
    acg_solve_subproblem, AcgObserver, AcgParams, AcgState, AcgStepRecord, Certificate,
};
use crate::hpe::HpeTriple;
use crate::problem::CompositeProblem;
use crate::trace::{RunStatus, RunTrace, Stopwatch, TraceRow};
use crate::{Error, Result, Vector};

#[derive(Clone, Debug)]
pub struct RestartState {
    pub k: usize,
    /// `B_k`
    pub b_total: f64,
    pub z: Vector,
    pub w: Vector,
    pub phi_at_w: f64,
    pub d0_estimate: f64,
    pub total_inner_iters: usize,
    pub total_oracle_calls: usize,
}

impl RestartState {
    /// `B_0 = 0`, `z_0 = w_0`; evaluates `φ(w_0)` once.
    pub fn new(problem: &CompositeProblem, w0: &Vector) -> Result<Self> {
        problem.check_dim(w0)?;
        let phi = problem.objective(w0);
        if !phi.is_finite() {
            return Err(Error::invalid("w0 must lie in dom h"));
        }
        Ok(Self {
            k: 0,
            b_total: 0.0,
            z: w0.clone(),
            w: w0.clone(),
            phi_at_w: phi,
            d0_estimate: 0.0,
            total_inner_iters: 0,
            total_oracle_calls: 1,
        })
    }
}

/// `b_k = (λ + √(λ² + 4λB_{k−1}))/2` and `B_k = B_{k−1} + b_k`.
pub fn outer_coefficients(b_total_prev: f64, lam: f64) -> (f64, f64) {
    let b = (lam + (lam * lam + 4.0 * lam * b_total_prev).sqrt()) / 2.0;
    (b, b_total_prev + b)
}

#[derive(Clone, Debug)]
pub struct OuterRecord {
    pub k: usize,
    pub lam: f64,
    pub sigma: f64,
    pub b: f64,
    pub b_total_prev: f64,
    pub b_total: f64,
    pub z_tilde: Vector,
    pub triple: HpeTriple,
    pub phi_at_w_tilde: f64,
    pub w: Vector,
    pub phi_at_w: f64,
    pub inner_iters: usize,
    pub oracle_calls: usize,
    pub via_guard: bool,
}

/// Hooks for instrumented runs. Every method has a no-op default.
pub trait RestartObserver {
    fn on_inner_step(
        &mut self,
        _k: usize,
        _params: &AcgParams,
        _record: &AcgStepRecord,
        _state: &AcgState,
        _certificate: &Certificate,
    ) {
    }
    fn on_outer_step(&mut self, _record: &OuterRecord) {}
}

impl RestartObserver for () {}

struct InnerAdapter<'a> {
    k: usize,
    outer: &'a mut dyn RestartObserver,
}

impl AcgObserver for InnerAdapter<'_> {
    fn on_step(
        &mut self,
        params: &AcgParams,
        record: &AcgStepRecord,
        state: &AcgState,
        certificate: &Certificate,
    ) {
        self.outer
            .on_inner_step(self.k, params, record, state, certificate);
    }
}

/// One outer iteration: extrapolate, solve the subproblem with ACG, then take
/// `z_k = z_{k−1} − b_k u_k` and the better of `w_{k−1}`, `w̃_k` (ties to `w̃_k`).
pub fn outer_step(
    state: &mut RestartState,
    problem: &CompositeProblem,
    lam: f64,
    sigma: f64,
    max_inner: usize,
    observer: &mut dyn RestartObserver,
) -> Result<OuterRecord> {
    if !(lam > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lam}")));
    }
    let l = problem.smooth_part()?.lipschitz();
    let k = state.k + 1;
    let b_total_prev = state.b_total;
    let (b, b_total) = outer_coefficients(b_total_prev, lam);
    let z_tilde = (&state.w * b_total_prev + &state.z * b) / b_total;

    let params = AcgParams::for_subproblem(l, lam, z_tilde.clone(), sigma, max_inner);
    let mut adapter = InnerAdapter { k, outer: observer };
    let sol = acg_solve_subproblem(problem, &z_tilde, &params, &mut adapter)?;

    state.z -= &sol.u * b;
    if sol.phi_at_w_tilde <= state.phi_at_w {
        state.w = sol.w_tilde.clone();
        state.phi_at_w = sol.phi_at_w_tilde;
    }
    state.b_total = b_total;
    state.k = k;
    state.total_inner_iters += sol.inner_iters;
    state.total_oracle_calls += sol.oracle_calls;

    let record = OuterRecord {
        k,
        lam,
        sigma,
        b,
        b_total_prev,
        b_total,
        triple: HpeTriple {
            w_tilde: sol.w_tilde,
            u: sol.u,
            eta: sol.eta,
            residual_sq: sol.certificate.residual_sq,
            criterion_rhs: sol.certificate.rhs_sq + params.abs_residual_tol,
        },
        z_tilde,
        phi_at_w_tilde: sol.phi_at_w_tilde,
        w: state.w.clone(),
        phi_at_w: state.phi_at_w,
        inner_iters: sol.inner_iters,
        oracle_calls: sol.oracle_calls,
        via_guard: sol.via_guard,
    };
    adapter.outer.on_outer_step(&record);
    Ok(record)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopRule {
    /// Certified gap when the problem carries a reference optimum, else a priori.
    Auto,
    /// `φ(w_k) − φ_ref ≤ ε̄`.
    ReferenceGap,
    /// `k = ceil(√2·d0/√(λε̄))` outer steps.
    APriori,
}

#[derive(Clone, Debug)]
pub struct RestartConfig {
    pub sigma: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Overrides every other source of `d0`.
    pub d0: Option<f64>,
    /// Outer steps of the heuristic `d0` warm-up when no reference exists.
    pub warmup_outer: usize,
    pub stop: StopRule,
}

impl Default for RestartConfig {
    fn default() -> Self {
        Self {
            sigma: AcgParams::DEFAULT_SIGMA,
            max_outer: 100_000,
            max_inner: AcgParams::DEFAULT_MAX_INNER,
            d0: None,
            warmup_outer: 20,
            stop: StopRule::Auto,
        }
    }
}

/// Where a run's `d0` came from; only `Reference` and `Given` are trustworthy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum D0Source {
    Given,
    Reference,
    Heuristic,
}

impl D0Source {
    pub fn as_str(self) -> &'static str {
        match self {
            D0Source::Given => "given",
            D0Source::Reference => "reference",
            D0Source::Heuristic => "heuristic",
        }
    }
}

/// `λ = max(1/L, min(d0²/ε̄, d0/√(L·ε̄)))`: the geometric mean of the admissible
/// range `[1/L, d0²/ε̄]`, clamped into it.
pub fn default_lambda(l: f64, d0_estimate: f64, eps_bar: f64) -> f64 {
    let hi = d0_estimate * d0_estimate / eps_bar;
    let mid = d0_estimate / (l.sqrt() * eps_bar.sqrt());
    (1.0 / l).max(hi.min(mid))
}

/// `ceil(√2·d0/√(λε̄))`, at least 1.
pub fn a_priori_outer_count(d0: f64, lam: f64, eps_bar: f64) -> usize {
    ((2f64.sqrt() * d0 / (lam * eps_bar).sqrt()).ceil() as usize).max(1)
}

/// `d0` from the configuration, the problem's reference minimizer, or a warm-up
/// run of `warmup_outer` steps (`‖w_0 − w_K‖`, not certified).
pub fn resolve_d0(
    problem: &CompositeProblem,
    w0: &Vector,
    lam: f64,
    config: &RestartConfig,
) -> Result<(f64, D0Source)> {
    if let Some(d0) = config.d0 {
        return Ok((d0, D0Source::Given));
    }
    if let Some(x_ref) = &problem.known_minimizer {
        return Ok(((w0 - x_ref).norm(), D0Source::Reference));
    }
    let mut state = RestartState::new(problem, w0)?;
    for _ in 0..config.warmup_outer.max(1) {
        outer_step(&mut state, problem, lam, config.sigma, config.max_inner, &mut ())?;
    }
    Ok(((w0 - &state.w).norm(), D0Source::Heuristic))
}

/// Runs restart ACG from `w0` and records one trace row per outer step with the
/// bound `2d0²/(λk²)`.
pub fn solve(
    problem: &CompositeProblem,
    w0: &Vector,
    lam: f64,
    eps_bar: f64,
    config: &RestartConfig,
    observer: &mut dyn RestartObserver,
) -> Result<RunTrace> {
    let clock = Stopwatch::start();
    if !(lam > 0.0) || !(eps_bar > 0.0) {
        return Err(Error::invalid("lambda and eps_bar must be positive"));
    }
    let l = problem.smooth_part()?.lipschitz();
    let mut state = RestartState::new(problem, w0)?;
    let (d0, d0_source) = resolve_d0(problem, w0, lam, config)?;
    state.d0_estimate = d0;

    let (lo, hi) = (1.0 / l, d0 * d0 / eps_bar);
    if lam < lo || lam > hi {
        warn!("restart_acg: lambda {lam:.3e} outside the admissible range [{lo:.3e}, {hi:.3e}]");
    }
    let stop = match config.stop {
        StopRule::Auto if problem.known_optimum.is_some() => StopRule::ReferenceGap,
        StopRule::Auto => StopRule::APriori,
        StopRule::ReferenceGap if problem.known_optimum.is_none() => {
            return Err(Error::invalid("reference-gap stopping needs a known optimum"));
        }
        s => s,
    };
    let a_priori = a_priori_outer_count(d0, lam, eps_bar);

    let mut trace = RunTrace::new("restart_acg");
    trace.set("lambda", lam);
    trace.set("sigma", config.sigma);
    trace.set("eps_bar", eps_bar);
    trace.set("d0", d0);
    trace.set("d0_source", d0_source.as_str());
    trace.set("stop", format!("{stop:?}"));
    trace.set("max_outer", config.max_outer);
    trace.set("max_inner", config.max_inner);

    loop {
        let record = match outer_step(&mut state, problem, lam, config.sigma, config.max_inner, observer) {
            Ok(r) => r,
            Err(e @ Error::InnerBudgetExhausted { .. }) => {
                trace.finish(RunStatus::Failed, Some(e.to_string()));
                return Ok(trace);
            }
            Err(e) => return Err(e),
        };
        let kf = record.k as f64;
        trace.rows.push(TraceRow {
            k: record.k,
            inner_iters: record.inner_iters,
            oracle_calls: state.total_oracle_calls,
            phi: state.phi_at_w,
            bound: Some(2.0 * d0 * d0 / (lam * kf * kf)),
            seconds: clock.seconds(),
        });
        let done = match stop {
            StopRule::ReferenceGap => {
                state.phi_at_w - problem.known_optimum.expect("checked above") <= eps_bar
            }
            _ => record.k >= a_priori,
        };
        if done {
            trace.finish(RunStatus::Converged, None);
            return Ok(trace);
        }
        if record.k >= config.max_outer {
            trace.finish(
                RunStatus::Budget,
                Some(format!("outer budget of {} steps exhausted", config.max_outer)),
            );
            return Ok(trace);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{lasso_from_data, make_lasso, reference_solve};
    use crate::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_outer_coefficients() {
        let (b, big_b) = outer_coefficients(0.0, 2.5);
        assert_eq!(b, 2.5);
        assert_eq!(big_b, 2.5);
        let (b2, big_b2) = outer_coefficients(1.0, 1.0);
        let sqrt5 = 5f64.sqrt();
        assert!((b2 - (1.0 + sqrt5) / 2.0).abs() < 1e-15);
        assert!((big_b2 - (3.0 + sqrt5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn coefficients_solve_quadratic_and_grow() {
        let lam = 0.37;
        let mut big_b = 0.0;
        for k in 1..200 {
            let (b, next) = outer_coefficients(big_b, lam);
            let resid = b * b - lam * b - lam * big_b;
            assert!(resid.abs() <= 1e-12 * b * b);
            assert!(next >= (k * k) as f64 * lam / 4.0);
            big_b = next;
        }
    }

    #[test]
    fn first_step_extrapolates_to_start() {
        let problem = make_lasso(2, 20, 10, 0.1).unwrap();
        let w0 = Vector::from_element(10, 0.1);
        let mut state = RestartState::new(&problem, &w0).unwrap();
        let rec = outer_step(&mut state, &problem, 1.0 / problem.lipschitz(), 0.9, 100, &mut ())
            .unwrap();
        assert_eq!(rec.z_tilde, w0);
        assert_eq!(rec.b, 1.0 / problem.lipschitz());
        assert_eq!(rec.b_total, rec.b);
    }

    #[test]
    fn optimal_start_is_a_fixed_point() {
        let problem = lasso_from_data(
            Matrix::from_row_slice(1, 1, &[2.0]),
            Vector::from_vec(vec![4.0]),
            0.0,
        )
        .with_reference(0.0, Some(Vector::from_vec(vec![2.0])));
        let w0 = Vector::from_vec(vec![2.0]);
        let mut state = RestartState::new(&problem, &w0).unwrap();
        for _ in 0..3 {
            let rec = outer_step(&mut state, &problem, 1.0, 0.9, 10, &mut ()).unwrap();
            assert!(rec.triple.u.norm() < 1e-15);
            assert_eq!(state.w, w0);
            assert!((&state.z - &w0).norm() < 1e-15);
        }
        let trace = solve(&problem, &w0, 1.0, 1e-6, &RestartConfig::default(), &mut ()).unwrap();
        assert!(trace.converged());
        assert_eq!(trace.rows.len(), 1);
    }

    #[test]
    fn default_lambda_examples() {
        assert_eq!(default_lambda(1.0, 1.0, 1.0), 1.0);
        assert!((default_lambda(100.0, 1.0, 1e-4) - 10.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let l = 10f64.powf(rng.random_range(-3.0..3.0));
            let d0 = 10f64.powf(rng.random_range(-3.0..3.0));
            let eps = 10f64.powf(rng.random_range(-8.0..0.0));
            let lam = default_lambda(l, d0, eps);
            let (lo, hi) = (1.0 / l, d0 * d0 / eps);
            assert!(lam >= lo);
            if lo <= hi {
                assert!(lam <= hi * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn solve_meets_gap_and_rate() {
        let problem = make_lasso(7, 40, 20, 0.1).unwrap();
        let reference = reference_solve(&problem, 1e-10).unwrap();
        let problem = problem.with_reference(reference.value, Some(reference.x.clone()));
        let w0 = Vector::zeros(20);
        let lam = 5.0 / problem.lipschitz();
        let trace = solve(&problem, &w0, lam, 1e-6, &RestartConfig::default(), &mut ()).unwrap();
        assert!(trace.converged(), "{:?}", trace.message);
        let d0 = (&w0 - &reference.x).norm();
        for row in &trace.rows {
            let kf = row.k as f64;
            assert!(row.phi - reference.value <= 2.0 * d0 * d0 / (lam * kf * kf) + 1e-9);
        }
        let last = trace.last().unwrap();
        assert!(last.phi - reference.value <= 1e-6);
        for pair in trace.rows.windows(2) {
            assert!(pair[1].phi <= pair[0].phi);
            assert!(pair[1].oracle_calls >= pair[0].oracle_calls);
        }
    }

    #[test]
    fn a_priori_rule_without_reference() {
        let problem = make_lasso(8, 30, 15, 0.1).unwrap();
        let w0 = Vector::zeros(15);
        let lam = 2.0 / problem.lipschitz();
        let cfg = RestartConfig {
            warmup_outer: 5,
            ..RestartConfig::default()
        };
        let trace = solve(&problem, &w0, lam, 1e-3, &cfg, &mut ()).unwrap();
        assert!(trace.converged());
        assert_eq!(trace.config["d0_source"], "heuristic");
        let d0: f64 = trace.config["d0"].parse().unwrap();
        assert_eq!(trace.rows.len(), a_priori_outer_count(d0, lam, 1e-3));
    }

    #[test]
    fn outer_budget_is_reported() {
        let problem = make_lasso(8, 30, 15, 0.1).unwrap();
        let w0 = Vector::zeros(15);
        let cfg = RestartConfig {
            max_outer: 2,
            d0: Some(100.0),
            ..RestartConfig::default()
        };
        let trace = solve(&problem, &w0, 1.0 / problem.lipschitz(), 1e-8, &cfg, &mut ()).unwrap();
        assert_eq!(trace.status, RunStatus::Budget);
        assert_eq!(trace.rows.len(), 2);
    }

    #[test]
    fn rejects_nonsmooth_problem() {
        let p = crate::problem::make_maxaffine(1, 3, 2).unwrap();
        let err = solve(&p, &Vector::zeros(2), 1.0, 1e-3, &RestartConfig::default(), &mut ());
        assert!(matches!(err, Err(Error::WrongProblemKind(_))));
    }
}
