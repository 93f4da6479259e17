//! Single-step baselines: FISTA for smooth problems and the fixed-step
//! proximal subgradient method for nonsmooth ones. Both count one `f` oracle
//! call and one prox per iteration.

use crate::problem::{CompositeProblem, ProxFriendly, SmoothOracle};
use crate::trace::{RunStatus, RunTrace, Stopwatch, TraceRow};
use crate::{Error, Result, Vector};

#[derive(Clone, Debug)]
pub struct BaselineConfig {
    pub max_iters: usize,
    /// Stop once `φ − φ_ref` is at most this (needs a reference optimum).
    pub target_gap: f64,
    /// Emit a trace row every this many iterations (and at the last one).
    pub record_every: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            max_iters: 1_000_000,
            target_gap: 1e-6,
            record_every: 1,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be >= 1"));
        }
        Ok(())
    }
}

/// `t_{k+1} = (1 + √(1 + 4t_k²))/2`.
pub fn fista_momentum(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

/// FISTA iterate triple, reusable by other drivers.
#[derive(Clone, Debug)]
pub struct FistaState {
    pub k: usize,
    pub t: f64,
    pub x: Vector,
    pub x_prev: Vector,
    pub y: Vector,
}

impl FistaState {
    pub fn new(x0: &Vector) -> Self {
        Self {
            k: 0,
            t: 1.0,
            x: x0.clone(),
            x_prev: x0.clone(),
            y: x0.clone(),
        }
    }

    /// `x_k = prox_{h/L}(y_k − ∇f(y_k)/L)` followed by the momentum update.
    /// Returns `∇f(y_k)` for callers that need it.
    pub fn step(&mut self, f: &dyn SmoothOracle, h: &dyn ProxFriendly, l: f64) -> Vector {
        let grad = f.gradient(&self.y);
        let x_next = h.prox(&(&self.y - &grad / l), 1.0 / l);
        let t_next = fista_momentum(self.t);
        self.y = &x_next + (&x_next - &self.x) * ((self.t - 1.0) / t_next);
        self.x_prev = std::mem::replace(&mut self.x, x_next);
        self.t = t_next;
        self.k += 1;
        grad
    }

    /// Drop the momentum (used by the gradient-based restart in the reference solver).
    pub fn reset_momentum(&mut self) {
        self.t = 1.0;
        self.y = self.x.clone();
    }
}

/// FISTA with stepsize `1/L`. Rows carry `φ(x_k)` and, when the problem has a
/// reference minimizer, the bound `2L‖x_0 − x*‖²/(k+1)²`.
pub fn fista_solve(
    problem: &CompositeProblem,
    x0: &Vector,
    config: &BaselineConfig,
) -> Result<RunTrace> {
    config.validate()?;
    problem.check_dim(x0)?;
    let clock = Stopwatch::start();
    let f = problem.smooth_part()?;
    let h = problem.h();
    let l = f.lipschitz();
    let d0 = problem.known_minimizer.as_ref().map(|x| (x0 - x).norm());

    let mut trace = RunTrace::new("fista");
    trace.set("stepsize", 1.0 / l);
    trace.set("max_iters", config.max_iters);
    trace.set("target_gap", config.target_gap);
    if let Some(d) = d0 {
        trace.set("d0", d);
    }

    let mut state = FistaState::new(x0);
    for k in 1..=config.max_iters {
        state.step(f, h, l);
        let phi = problem.objective(&state.x);
        let done = problem
            .known_optimum
            .is_some_and(|p| phi - p <= config.target_gap);
        if done || k % config.record_every == 0 || k == config.max_iters {
            let kf = k as f64;
            trace.rows.push(TraceRow {
                k,
                inner_iters: 1,
                oracle_calls: k,
                phi,
                bound: d0.map(|d| 2.0 * l * d * d / ((kf + 1.0) * (kf + 1.0))),
                seconds: clock.seconds(),
            });
        }
        if done {
            trace.finish(RunStatus::Converged, None);
            return Ok(trace);
        }
    }
    let best = trace.best_phi();
    trace.finish(
        RunStatus::Budget,
        Some(format!(
            "iteration budget of {} exhausted, best value {best:.6e}",
            config.max_iters
        )),
    );
    Ok(trace)
}

/// `x_{k+1} = prox_h(x_k − λf′(x_k), λ)` with `λ = ε̄/M²`. Row `k` carries the
/// best `φ` among the `k` points evaluated so far.
pub fn subgradient_solve(
    problem: &CompositeProblem,
    x0: &Vector,
    eps_bar: f64,
    config: &BaselineConfig,
) -> Result<RunTrace> {
    config.validate()?;
    problem.check_dim(x0)?;
    if !(eps_bar > 0.0) {
        return Err(Error::invalid("eps_bar must be positive"));
    }
    let clock = Stopwatch::start();
    let f = problem.nonsmooth_part()?;
    let h = problem.h();
    let m = f.lipschitz();
    if !(m > 0.0) {
        return Err(Error::invalid("subgradient method needs M > 0"));
    }
    let lam = eps_bar / (m * m);

    let mut trace = RunTrace::new("subgradient");
    trace.set("stepsize", lam);
    trace.set("eps_bar", eps_bar);
    trace.set("max_iters", config.max_iters);

    let mut x = x0.clone();
    let mut best = f64::INFINITY;
    for k in 1..=config.max_iters {
        let (fx, g) = f.value_and_subgradient(&x);
        best = best.min(fx + h.value(&x));
        let done = problem.known_optimum.is_some_and(|p| best - p <= eps_bar);
        if done || k % config.record_every == 0 || k == config.max_iters {
            trace.rows.push(TraceRow {
                k,
                inner_iters: 1,
                oracle_calls: k,
                phi: best,
                bound: None,
                seconds: clock.seconds(),
            });
        }
        if done {
            trace.finish(RunStatus::Converged, None);
            return Ok(trace);
        }
        x = h.prox(&(&x - &g * lam), lam);
    }
    trace.finish(
        RunStatus::Budget,
        Some(format!(
            "iteration budget of {} exhausted, best value {best:.6e}",
            config.max_iters
        )),
    );
    Ok(trace)
}
