//! Complexity sweep of restart ACG over the target accuracy.

use std::fmt::Write as _;

use serde::Serialize;

use super::PreparedProblem;
use crate::restart::{self, default_lambda, RestartConfig, StopRule};
use crate::{Error, Result};

pub const DEFAULT_BENCH_EPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

#[derive(Clone, Debug, Serialize)]
pub struct BenchPoint {
    pub eps_bar: f64,
    pub lambda: f64,
    pub outer_iters: usize,
    pub total_inner_iters: usize,
    pub total_oracle_calls: usize,
    pub final_gap: f64,
    /// `total_inner_iters · √ε̄`; flat when the count scales as `ε̄^{-1/2}`.
    pub normalized: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub points: Vec<BenchPoint>,
    /// max / min of `normalized` across the sweep.
    pub spread: f64,
}

impl BenchReport {
    pub const CSV_HEADER: &'static str =
        "eps_bar,lambda,outer_iters,total_inner_iters,total_oracle_calls,final_gap,normalized";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{},{},{},{:.16e},{:.16e}",
                p.eps_bar,
                p.lambda,
                p.outer_iters,
                p.total_inner_iters,
                p.total_oracle_calls,
                p.final_gap,
                p.normalized
            );
        }
        out
    }
}

/// For each `ε̄`, runs restart ACG with `λ = default_lambda(L, d0, ε̄)` for the
/// a-priori outer count `ceil(√2·d0/√(λε̄))`, with `d0` from the reference.
/// `lambda` overrides the stepsize rule for every point.
pub fn bench_sweep(
    prepared: &PreparedProblem,
    eps_list: &[f64],
    lambda: Option<f64>,
    base: &RestartConfig,
) -> Result<BenchReport> {
    if eps_list.is_empty() {
        return Err(Error::invalid("bench needs at least one eps_bar"));
    }
    let problem = &prepared.problem;
    let l = problem.lipschitz();
    let d0 = prepared.d0;
    let phi_ref = prepared.reference.value;
    let mut points = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps > 0.0) {
            return Err(Error::invalid(format!("eps_bar must be positive, got {eps}")));
        }
        let lam = lambda.unwrap_or_else(|| default_lambda(l, d0.max(1e-12), eps));
        let cfg = RestartConfig {
            stop: StopRule::APriori,
            d0: Some(d0),
            ..base.clone()
        };
        let trace = restart::solve(problem, &prepared.x0, lam, eps, &cfg, &mut ())?;
        if !trace.converged() {
            return Err(Error::InvalidArgument(format!(
                "bench run at eps_bar={eps:e} did not finish: {}",
                trace.message.unwrap_or_default()
            )));
        }
        let inner = trace.total_inner_iters();
        points.push(BenchPoint {
            eps_bar: eps,
            lambda: lam,
            outer_iters: trace.rows.len(),
            total_inner_iters: inner,
            total_oracle_calls: trace.total_oracle_calls(),
            final_gap: trace.last().map_or(f64::NAN, |r| r.phi - phi_ref),
            normalized: inner as f64 * eps.sqrt(),
        });
    }
    let max = points.iter().map(|p| p.normalized).fold(f64::NEG_INFINITY, f64::max);
    let min = points.iter().map(|p| p.normalized).fold(f64::INFINITY, f64::min);
    Ok(BenchReport {
        points,
        spread: max / min,
    })
}
