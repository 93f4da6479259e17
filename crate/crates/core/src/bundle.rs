//! Modern proximal bundle method (MPB) as the inner engine of the HPE
//! framework for nonsmooth `φ = f + h`.
//!
//! The inner loop builds a cutting-plane model `Γ_j` of `f`, solves
//! `min Γ_j + h + ‖· − x_0‖²/(2λ)` through its dual over the simplex, and stops
//! once the gap `t_j = ψ(x̃_j) − m_j` drops below `δ`.

use std::io::Write;

use log::warn;

use crate::hpe::HpeTriple;
use crate::problem::{CompositeProblem, NonsmoothOracle, ProxFriendly};
use crate::trace::{RunStatus, RunTrace, Stopwatch, TraceRow};
use crate::{Error, Result, Vector};

/// Linearization `ℓ(u) = value + ⟨slope, u − anchor⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cut {
    pub anchor: Vector,
    pub value: f64,
    pub slope: Vector,
}

impl Cut {
    pub fn at(f: &dyn NonsmoothOracle, x: &Vector) -> Self {
        let (value, slope) = f.value_and_subgradient(x);
        Self {
            anchor: x.clone(),
            value,
            slope,
        }
    }

    pub fn eval(&self, u: &Vector) -> f64 {
        self.value + self.slope.dot(&(u - &self.anchor))
    }
}

/// Ordered list of cuts; the model is their pointwise maximum.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bundle {
    cuts: Vec<Cut>,
    /// Drop the oldest cut beyond this size.
    pub max_cuts: Option<usize>,
}

impl Bundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_cap(max_cuts: Option<usize>) -> Self {
        Self {
            cuts: Vec::new(),
            max_cuts,
        }
    }

    pub fn from_cuts(cuts: Vec<Cut>) -> Self {
        Self {
            cuts,
            max_cuts: None,
        }
    }

    /// Adds a cut; returns the index of a dropped cut, if any.
    pub fn push(&mut self, cut: Cut) -> Option<usize> {
        self.cuts.push(cut);
        match self.max_cuts {
            Some(cap) if cap > 0 && self.cuts.len() > cap => {
                self.cuts.remove(0);
                Some(0)
            }
            _ => None,
        }
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    /// `Γ(u) = max_i ℓ_i(u)`; `−∞` for an empty bundle.
    pub fn model(&self, u: &Vector) -> f64 {
        self.cuts
            .iter()
            .map(|c| c.eval(u))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// One line per cut: anchor entries, value, slope entries, whitespace separated.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for c in &self.cuts {
            let mut fields: Vec<String> = c.anchor.iter().map(|a| format!("{a:.16e}")).collect();
            fields.push(format!("{:.16e}", c.value));
            fields.extend(c.slope.iter().map(|s| format!("{s:.16e}")));
            writeln!(out, "{}", fields.join(" "))?;
        }
        Ok(())
    }

    /// Inverse of [`Bundle::dump`] for points in dimension `n`.
    pub fn parse_dump(text: &str, n: usize) -> Result<Self> {
        let mut cuts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if vals.len() != 2 * n + 1 {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 1,
                    2 * n + 1,
                    vals.len()
                )));
            }
            cuts.push(Cut {
                anchor: Vector::from_column_slice(&vals[..n]),
                value: vals[n],
                slope: Vector::from_column_slice(&vals[n + 1..]),
            });
        }
        Ok(Self::from_cuts(cuts))
    }
}

#[derive(Clone, Debug)]
pub struct ModelProxResult {
    /// Primal point `u(θ)` for the final weights.
    pub x: Vector,
    /// Dual value `d(θ)`: a lower bound on the model subproblem's minimum.
    pub m: f64,
    pub theta: Vec<f64>,
    /// Primal model objective at `x` minus `m`.
    pub dual_gap: f64,
    /// `Γ(x) + h(x) + ‖x − x_0‖²/(2λ)`
    pub primal_value: f64,
    /// Aggregate linearization `Σθ_iℓ_i` evaluated at `x`.
    pub aggregate_at_x: f64,
    pub h_at_x: f64,
    pub iterations: usize,
    pub prox_calls: usize,
}

pub const DEFAULT_MAX_DUAL_ITERS: usize = 100_000;

struct DualPoint {
    u: Vector,
    cut_values: Vec<f64>,
    aggregate: f64,
    h_u: f64,
    d: f64,
}

fn dual_point(
    cuts: &[Cut],
    h: &dyn ProxFriendly,
    x0: &Vector,
    lam: f64,
    theta: &[f64],
) -> DualPoint {
    let mut s = Vector::zeros(x0.len());
    for (c, &w) in cuts.iter().zip(theta) {
        if w != 0.0 {
            s.axpy(w, &c.slope, 1.0);
        }
    }
    let u = h.prox(&(x0 - &s * lam), lam);
    let cut_values: Vec<f64> = cuts.iter().map(|c| c.eval(&u)).collect();
    let aggregate: f64 = cut_values.iter().zip(theta).map(|(v, w)| v * w).sum();
    let h_u = h.value(&u);
    let d = aggregate + h_u + (&u - x0).norm_squared() / (2.0 * lam);
    DualPoint {
        u,
        cut_values,
        aggregate,
        h_u,
        d,
    }
}

/// Solves `min_u Γ(u) + h(u) + ‖u − x_0‖²/(2λ)` by maximizing its dual
/// `d(θ) = min_u Σθ_iℓ_i(u) + h(u) + ‖u − x_0‖²/(2λ)` over the simplex with
/// away-step conditional gradient, until the gap falls to `dual_tol`.
/// `warm_start` may supply initial weights (padded with zeros).
pub fn solve_model_prox(
    bundle: &Bundle,
    h: &dyn ProxFriendly,
    x0: &Vector,
    lam: f64,
    dual_tol: f64,
    warm_start: Option<&[f64]>,
    max_iters: usize,
) -> Result<ModelProxResult> {
    if bundle.is_empty() {
        return Err(Error::invalid("model prox needs a nonempty bundle"));
    }
    if !(lam > 0.0) || !(dual_tol > 0.0) {
        return Err(Error::invalid("lambda and dual_tol must be positive"));
    }
    let cuts = bundle.cuts();
    let n = cuts.len();
    let mut theta = vec![0.0; n];
    match warm_start {
        Some(w) if w.iter().take(n).any(|&v| v > 0.0) => {
            for (t, &v) in theta.iter_mut().zip(w) {
                *t = v.max(0.0);
            }
            let total: f64 = theta.iter().sum();
            theta.iter_mut().for_each(|t| *t /= total);
        }
        _ => theta[n - 1] = 1.0,
    }

    let mut point = dual_point(cuts, h, x0, lam, &theta);
    let mut prox_calls = 1;
    let mut iterations = 0;
    loop {
        let (fw_idx, fw_val) = argmax(&point.cut_values);
        let fw_gap = fw_val - point.aggregate;
        if fw_gap <= dual_tol || iterations >= max_iters {
            break;
        }
        let (away_idx, away_val) = point
            .cut_values
            .iter()
            .enumerate()
            .filter(|(i, _)| theta[*i] > 0.0)
            .fold((usize::MAX, f64::INFINITY), |acc, (i, &v)| {
                if v < acc.1 {
                    (i, v)
                } else {
                    acc
                }
            });
        let away_gap = point.aggregate - away_val;

        // direction in θ-space as sparse coefficients: dir = e_i − θ or θ − e_j
        let (toward, sign, step_max, slope_gain) = if fw_gap >= away_gap || away_idx == usize::MAX {
            (fw_idx, 1.0, 1.0, fw_gap)
        } else {
            let w = theta[away_idx];
            let max = if w < 1.0 { w / (1.0 - w) } else { f64::INFINITY };
            (away_idx, -1.0, max, away_gap)
        };
        // S·dir = sign·(slope_toward − s̄)
        let mut s_bar = Vector::zeros(x0.len());
        for (c, &w) in cuts.iter().zip(&theta) {
            if w != 0.0 {
                s_bar.axpy(w, &c.slope, 1.0);
            }
        }
        let curvature = lam * (&cuts[toward].slope - &s_bar).norm_squared();
        let mut gamma = if curvature > 0.0 {
            slope_gain / curvature
        } else {
            f64::INFINITY
        };
        if gamma > step_max {
            gamma = step_max;
        }
        if !gamma.is_finite() {
            // flat direction with no bound: only possible on a FW step, capped at 1
            gamma = 1.0;
        }
        if sign > 0.0 {
            for t in theta.iter_mut() {
                *t *= 1.0 - gamma;
            }
            theta[toward] += gamma;
        } else {
            for t in theta.iter_mut() {
                *t *= 1.0 + gamma;
            }
            theta[toward] -= gamma;
            if gamma == step_max {
                theta[toward] = 0.0;
            }
        }
        for t in theta.iter_mut() {
            if *t < 0.0 {
                *t = 0.0;
            }
        }
        let total: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|t| *t /= total);

        let next = dual_point(cuts, h, x0, lam, &theta);
        prox_calls += 1;
        iterations += 1;
        point = next;
    }

    let model = point
        .cut_values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let primal_value = model + point.h_u + (&point.u - x0).norm_squared() / (2.0 * lam);
    Ok(ModelProxResult {
        dual_gap: primal_value - point.d,
        m: point.d,
        primal_value,
        aggregate_at_x: point.aggregate,
        h_at_x: point.h_u,
        x: point.u,
        theta,
        iterations,
        prox_calls,
    })
}

fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
}

#[derive(Clone, Debug)]
pub struct MpbConfig {
    pub max_inner: usize,
    pub max_cuts: Option<usize>,
    /// Defaults to `δ/10`.
    pub dual_tol: Option<f64>,
    pub max_dual_iters: usize,
}

impl Default for MpbConfig {
    fn default() -> Self {
        Self {
            max_inner: 100_000,
            max_cuts: None,
            dual_tol: None,
            max_dual_iters: DEFAULT_MAX_DUAL_ITERS,
        }
    }
}

/// One inner iteration of [`mpb_inner`].
#[derive(Clone, Debug)]
pub struct MpbInnerRecord {
    pub j: usize,
    pub x0: Vector,
    pub lam: f64,
    pub x_j: Vector,
    pub m_j: f64,
    pub t_j: f64,
    pub x_tilde: Vector,
    pub psi_at_x_tilde: f64,
    pub model_prox: ModelProxResult,
}

#[derive(Clone, Debug)]
pub struct MpbInnerResult {
    pub x0: Vector,
    pub lam: f64,
    pub delta: f64,
    pub x_j: Vector,
    pub x_tilde: Vector,
    pub m_j: f64,
    pub t_j: f64,
    pub j: usize,
    /// Bundle as it was when the last model prox was solved.
    pub bundle: Bundle,
    pub last_model_prox: ModelProxResult,
    pub phi_at_x_tilde: f64,
    pub psi_at_x_tilde: f64,
    /// Cut at `x_j`, computed for the stopping test and reusable as the next
    /// inner loop's first cut.
    pub cut_at_x_j: Cut,
    pub phi_at_x_j: f64,
    pub oracle_calls: usize,
    pub prox_calls: usize,
}

/// Hooks for instrumented bundle runs.
pub trait BundleObserver {
    fn on_inner_step(&mut self, _k: usize, _record: &MpbInnerRecord, _bundle: &Bundle) {}
    fn on_outer_step(&mut self, _record: &HpeOuterRecord) {}
}

impl BundleObserver for () {}

/// MPB on `ψ = φ + ‖· − x_0‖²/(2λ)` until `t_j ≤ δ`. `first_cut`, when given,
/// must be the cut at `x_0` and saves one oracle call.
#[allow(clippy::too_many_arguments)]
pub fn mpb_inner(
    problem: &CompositeProblem,
    x0: &Vector,
    lam: f64,
    delta: f64,
    config: &MpbConfig,
    first_cut: Option<Cut>,
    k: usize,
    observer: &mut dyn BundleObserver,
) -> Result<MpbInnerResult> {
    problem.check_dim(x0)?;
    if !(lam > 0.0) || !(delta > 0.0) {
        return Err(Error::invalid("lambda and delta must be positive"));
    }
    let f = problem.nonsmooth_part()?;
    let h = problem.h();
    let dual_tol = config.dual_tol.unwrap_or(delta / 10.0);
    let psi = |value_f: f64, h_u: f64, u: &Vector| value_f + h_u + (u - x0).norm_squared() / (2.0 * lam);

    let mut oracle_calls = 0;
    let mut prox_calls = 0;
    let cut0 = match first_cut {
        Some(c) => {
            debug_assert_eq!(&c.anchor, x0);
            c
        }
        None => {
            oracle_calls += 1;
            Cut::at(f, x0)
        }
    };
    let h0 = h.value(x0);
    let mut x_tilde = x0.clone();
    let mut phi_x_tilde = cut0.value + h0;
    let mut psi_x_tilde = phi_x_tilde;
    let mut bundle = Bundle::with_cap(config.max_cuts);
    bundle.push(cut0);
    let mut theta: Vec<f64> = Vec::new();
    let mut best_t = f64::INFINITY;

    for j in 1..=config.max_inner {
        let mp = solve_model_prox(
            &bundle,
            h,
            x0,
            lam,
            dual_tol,
            Some(&theta),
            config.max_dual_iters,
        )?;
        prox_calls += mp.prox_calls;
        let cut = Cut::at(f, &mp.x);
        oracle_calls += 1;
        let phi_xj = cut.value + mp.h_at_x;
        let psi_xj = psi(cut.value, mp.h_at_x, &mp.x);
        if psi_xj <= psi_x_tilde {
            x_tilde = mp.x.clone();
            phi_x_tilde = phi_xj;
            psi_x_tilde = psi_xj;
        }
        let t_j = psi_x_tilde - mp.m;
        best_t = best_t.min(t_j);
        let record = MpbInnerRecord {
            j,
            x0: x0.clone(),
            lam,
            x_j: mp.x.clone(),
            m_j: mp.m,
            t_j,
            x_tilde: x_tilde.clone(),
            psi_at_x_tilde: psi_x_tilde,
            model_prox: mp.clone(),
        };
        observer.on_inner_step(k, &record, &bundle);

        let residual_sq = (&mp.x - &x_tilde).norm_squared();
        let eta = (t_j - residual_sq / (2.0 * lam)).max(0.0);
        if t_j <= delta && residual_sq + 2.0 * lam * eta <= 2.0 * lam * delta {
            return Ok(MpbInnerResult {
                x0: x0.clone(),
                lam,
                delta,
                x_j: mp.x.clone(),
                x_tilde,
                m_j: mp.m,
                t_j,
                j,
                bundle,
                last_model_prox: mp,
                phi_at_x_tilde: phi_x_tilde,
                psi_at_x_tilde: psi_x_tilde,
                cut_at_x_j: cut,
                phi_at_x_j: phi_xj,
                oracle_calls,
                prox_calls,
            });
        }
        theta = mp.theta;
        if bundle.push(cut).is_some() {
            theta.remove(0);
        }
        theta.push(0.0);
    }
    Err(Error::BudgetExhausted {
        solver: "mpb_inner",
        budget: config.max_inner,
        best_value: best_t,
    })
}

/// `u = (x_0 − x_j)/λ`, `η = t_j − ‖x_j − x̃_j‖²/(2λ)` (clipped at zero),
/// `residual_sq = ‖λu + x̃_j − x_0‖²`, right side `2λδ`.
pub fn mpb_certificate(inner: &MpbInnerResult) -> HpeTriple {
    let lam = inner.lam;
    let u = (&inner.x0 - &inner.x_j) / lam;
    let residual_sq = (&u * lam + &inner.x_tilde - &inner.x0).norm_squared();
    let eta = (inner.t_j - (&inner.x_j - &inner.x_tilde).norm_squared() / (2.0 * lam)).max(0.0);
    HpeTriple {
        w_tilde: inner.x_tilde.clone(),
        u,
        eta,
        residual_sq,
        criterion_rhs: 2.0 * lam * inner.delta,
    }
}

/// `ε_j` from its definition with the aggregate cut in place of the model:
/// `φ(x̃_j) − (ℓ̄ + h)(x_j) − ⟨u, x̃_j − x_j⟩`.
pub fn mpb_epsilon_direct(inner: &MpbInnerResult) -> f64 {
    let mp = &inner.last_model_prox;
    let u = (&inner.x0 - &inner.x_j) / inner.lam;
    inner.phi_at_x_tilde - (mp.aggregate_at_x + mp.h_at_x) - u.dot(&(&inner.x_tilde - &inner.x_j))
}

#[derive(Clone, Debug)]
pub struct HpeOuterRecord {
    pub k: usize,
    pub w_prev: Vector,
    pub w: Vector,
    pub triple: HpeTriple,
    pub inner: MpbInnerResult,
    pub best_phi: f64,
    pub oracle_calls: usize,
}

#[derive(Clone, Debug)]
pub struct HpeConfig {
    pub mpb: MpbConfig,
    /// `C` in the oracle budget `ceil(C·M²d0²/ε̄²)`.
    pub budget_constant: f64,
    pub d0: Option<f64>,
    pub max_outer: usize,
    pub warmup_outer: usize,
}

impl Default for HpeConfig {
    fn default() -> Self {
        Self {
            mpb: MpbConfig::default(),
            budget_constant: 8.0,
            d0: None,
            max_outer: 1_000_000,
            warmup_outer: 20,
        }
    }
}

/// `λ = max(ε̄/M², min(d0²/ε̄, d0/M))`, the geometric mean of the admissible
/// range clamped into it.
pub fn default_bundle_lambda(m: f64, d0: f64, eps_bar: f64) -> f64 {
    (eps_bar / (m * m)).max((d0 * d0 / eps_bar).min(d0 / m))
}

/// `ceil(C·M²d0²/ε̄²)`, at least 1.
pub fn oracle_budget(c: f64, m: f64, d0: f64, eps_bar: f64) -> usize {
    let b = (c * m * m * d0 * d0 / (eps_bar * eps_bar)).ceil();
    if b >= usize::MAX as f64 {
        usize::MAX
    } else {
        (b as usize).max(1)
    }
}

/// HPE outer loop with MPB inner solves: `w_k = w_{k−1} − λu_k = x_j`. The
/// bundle is rebuilt from scratch at every outer step. Rows carry the best `φ`
/// seen so far over all `w_k` and `w̃_k`.
pub fn hpe_solve(
    problem: &CompositeProblem,
    w0: &Vector,
    lam: f64,
    delta: f64,
    eps_bar: f64,
    config: &HpeConfig,
    observer: &mut dyn BundleObserver,
) -> Result<RunTrace> {
    let clock = Stopwatch::start();
    problem.check_dim(w0)?;
    if !(lam > 0.0) || !(delta > 0.0) || !(eps_bar > 0.0) {
        return Err(Error::invalid("lambda, delta and eps_bar must be positive"));
    }
    let f = problem.nonsmooth_part()?;
    let m = f.lipschitz();
    let phi0 = problem.objective(w0);
    if !phi0.is_finite() {
        return Err(Error::invalid("w0 must lie in dom h"));
    }

    let (d0, d0_source) = if let Some(d) = config.d0 {
        (d, "given")
    } else if let Some(x) = &problem.known_minimizer {
        ((w0 - x).norm(), "reference")
    } else {
        let mut w = w0.clone();
        let mut cut = None;
        for k in 1..=config.warmup_outer.max(1) {
            let inner = mpb_inner(problem, &w, lam, delta, &config.mpb, cut.take(), k, &mut ())?;
            w = inner.x_j.clone();
            cut = Some(inner.cut_at_x_j);
        }
        ((w0 - &w).norm(), "heuristic")
    };
    let (lo, hi) = (eps_bar / (m * m), d0 * d0 / eps_bar);
    if lam < lo || lam > hi {
        warn!("mpb: lambda {lam:.3e} outside the admissible range [{lo:.3e}, {hi:.3e}]");
    }
    let budget = oracle_budget(config.budget_constant, m, d0, eps_bar);

    let mut trace = RunTrace::new("mpb");
    trace.set("lambda", lam);
    trace.set("delta", delta);
    trace.set("eps_bar", eps_bar);
    trace.set("d0", d0);
    trace.set("d0_source", d0_source);
    trace.set("oracle_budget", budget);
    trace.set("budget_constant", config.budget_constant);

    let mut w = w0.clone();
    let mut best = phi0;
    let mut calls = 1;
    let mut cut = Some(Cut {
        anchor: w0.clone(),
        value: phi0 - problem.h().value(w0),
        slope: f.subgradient(w0),
    });
    for k in 1..=config.max_outer {
        let inner = match mpb_inner(problem, &w, lam, delta, &config.mpb, cut.take(), k, observer) {
            Ok(r) => r,
            Err(e @ Error::BudgetExhausted { .. }) => {
                trace.finish(RunStatus::Failed, Some(e.to_string()));
                return Ok(trace);
            }
            Err(e) => return Err(e),
        };
        calls += inner.oracle_calls;
        let triple = mpb_certificate(&inner);
        // w_{k−1} − λu_k equals x_j up to rounding; take x_j itself
        let w_next = inner.x_j.clone();
        best = best.min(inner.phi_at_x_tilde).min(inner.phi_at_x_j);
        let record = HpeOuterRecord {
            k,
            w_prev: w.clone(),
            w: w_next.clone(),
            triple,
            best_phi: best,
            oracle_calls: calls,
            inner,
        };
        observer.on_outer_step(&record);
        trace.rows.push(TraceRow {
            k,
            inner_iters: record.inner.j,
            oracle_calls: calls,
            phi: best,
            bound: None,
            seconds: clock.seconds(),
        });
        cut = Some(record.inner.cut_at_x_j.clone());
        w = w_next;
        if problem.known_optimum.is_some_and(|p| best - p <= eps_bar) {
            trace.finish(RunStatus::Converged, None);
            return Ok(trace);
        }
        if calls >= budget {
            trace.finish(
                RunStatus::Budget,
                Some(format!("oracle budget of {budget} calls exhausted, best value {best:.6e}")),
            );
            return Ok(trace);
        }
    }
    trace.finish(
        RunStatus::Budget,
        Some(format!("outer budget of {} steps exhausted", config.max_outer)),
    );
    Ok(trace)
}
