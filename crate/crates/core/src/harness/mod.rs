//! Experiment orchestration: build a problem, attach its reference solution,
//! run methods, and emit one CSV per method plus a JSON summary.

mod bench;
mod spec;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::baselines::{fista_solve, subgradient_solve, BaselineConfig};
use crate::bundle::{default_bundle_lambda, hpe_solve, HpeConfig};
use crate::problem::{reference_solve, CompositeProblem, ReferenceSolution};
use crate::restart::{self, default_lambda, RestartConfig, StopRule};
use crate::trace::{RunStatus, RunTrace};
use crate::verify::{verify_bundle_run, verify_restart_run, VerifyOptions, VerifyReport};
use crate::{Error, Result, Vector};

pub use bench::{bench_sweep, BenchPoint, BenchReport, DEFAULT_BENCH_EPS};
pub use spec::{ExperimentSpec, MethodKind, MethodSpec, ProblemKind, ProblemSpec};

/// Environment variable consulted for the output directory when no
/// `--out-dir` flag is given.
pub const OUT_DIR_ENV: &str = "PROXHPE_OUT_DIR";

/// Gaps at which the summary reports oracle calls.
pub const SUMMARY_GAPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// A problem together with its reference solution and start point.
#[derive(Clone, Debug)]
pub struct PreparedProblem {
    pub spec: ProblemSpec,
    pub problem: CompositeProblem,
    pub reference: ReferenceSolution,
    pub x0: Vector,
    /// `‖x0 − x_ref‖`, an estimate of `d0`.
    pub d0: f64,
}

pub fn prepare(spec: &ProblemSpec) -> Result<PreparedProblem> {
    let base = spec.build()?;
    let reference = reference_solve(&base, spec.ref_tol())?;
    let problem = base.with_reference(reference.value, Some(reference.x.clone()));
    let x0 = problem.prox_h(&Vector::zeros(problem.dimension()), 1.0)?;
    let d0 = (&x0 - &reference.x).norm();
    Ok(PreparedProblem {
        spec: spec.clone(),
        problem,
        reference,
        x0,
        d0,
    })
}

/// Stepsize a method uses when none is given.
pub fn resolve_lambda(prepared: &PreparedProblem, method: &MethodSpec) -> Option<f64> {
    let eps = method.eps_bar();
    let scale = prepared.problem.lipschitz();
    match method.name {
        MethodKind::RestartAcg => Some(
            method
                .lambda
                .unwrap_or_else(|| default_lambda(scale, prepared.d0.max(1e-12), eps)),
        ),
        MethodKind::Mpb => Some(
            method
                .lambda
                .unwrap_or_else(|| default_bundle_lambda(scale, prepared.d0.max(1e-12), eps)),
        ),
        _ => None,
    }
}

/// Runs one method against a prepared problem.
pub fn run_method(prepared: &PreparedProblem, method: &MethodSpec) -> Result<RunTrace> {
    let problem = &prepared.problem;
    let x0 = &prepared.x0;
    let eps = method.eps_bar();
    let lam = resolve_lambda(prepared, method);
    let mut trace = match method.name {
        MethodKind::RestartAcg => {
            let mut cfg = RestartConfig {
                stop: StopRule::ReferenceGap,
                ..RestartConfig::default()
            };
            if let Some(s) = method.sigma {
                cfg.sigma = s;
            }
            if let Some(m) = method.max_outer {
                cfg.max_outer = m;
            }
            if let Some(m) = method.max_inner {
                cfg.max_inner = m;
            }
            restart::solve(problem, x0, lam.expect("set above"), eps, &cfg, &mut ())?
        }
        MethodKind::Fista => {
            let cfg = BaselineConfig {
                max_iters: method.max_iters.unwrap_or(1_000_000),
                target_gap: eps,
                record_every: 1,
            };
            fista_solve(problem, x0, &cfg)?
        }
        MethodKind::Mpb => {
            let mut cfg = HpeConfig::default();
            if let Some(c) = method.budget_constant {
                cfg.budget_constant = c;
            }
            if let Some(m) = method.max_outer {
                cfg.max_outer = m;
            }
            if let Some(m) = method.max_inner {
                cfg.mpb.max_inner = m;
            }
            let delta = method.delta.unwrap_or(eps / 2.0);
            hpe_solve(problem, x0, lam.expect("set above"), delta, eps, &cfg, &mut ())?
        }
        MethodKind::Subgradient => {
            let m = problem.lipschitz();
            let budget_constant = method.budget_constant.unwrap_or(8.0);
            let budget = crate::bundle::oracle_budget(budget_constant, m, prepared.d0, eps);
            let cfg = BaselineConfig {
                max_iters: method.max_iters.unwrap_or(budget.min(50_000_000)),
                target_gap: eps,
                record_every: 1,
            };
            subgradient_solve(problem, x0, eps, &cfg)?
        }
    };
    trace.method = method.label();
    Ok(trace)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReferenceSummary {
    pub value: f64,
    pub gap_bound: f64,
    pub certified: bool,
    pub d0_estimate: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodSummary {
    pub label: String,
    pub method: String,
    pub status: Option<RunStatus>,
    pub message: Option<String>,
    pub error: Option<String>,
    pub iterations: usize,
    pub total_inner_iters: usize,
    pub total_oracle_calls: usize,
    pub final_phi: Option<f64>,
    pub final_gap: Option<f64>,
    /// Keys are the gaps formatted as `1e-2`, ...
    pub oracle_calls_at_gap: BTreeMap<String, Option<usize>>,
    pub config: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSummary {
    pub problem: String,
    pub dimension: usize,
    pub lipschitz: f64,
    pub reference: ReferenceSummary,
    pub methods: Vec<MethodSummary>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub traces: Vec<(String, Result<RunTrace>)>,
    pub summary: ExperimentSummary,
}

impl ExperimentOutcome {
    /// True when every method ran and converged.
    pub fn all_converged(&self) -> bool {
        self.traces
            .iter()
            .all(|(_, t)| t.as_ref().is_ok_and(RunTrace::converged))
    }
}

fn gap_key(gap: f64) -> String {
    format!("{gap:e}")
}

fn summarize(label: &str, kind: MethodKind, res: &Result<RunTrace>, phi_ref: f64) -> MethodSummary {
    let mut s = MethodSummary {
        label: label.to_string(),
        method: kind.as_str().to_string(),
        status: None,
        message: None,
        error: None,
        iterations: 0,
        total_inner_iters: 0,
        total_oracle_calls: 0,
        final_phi: None,
        final_gap: None,
        oracle_calls_at_gap: SUMMARY_GAPS.iter().map(|&g| (gap_key(g), None)).collect(),
        config: BTreeMap::new(),
    };
    match res {
        Ok(t) => {
            s.status = Some(t.status);
            s.message = t.message.clone();
            s.iterations = t.last().map_or(0, |r| r.k);
            s.total_inner_iters = t.total_inner_iters();
            s.total_oracle_calls = t.total_oracle_calls();
            s.final_phi = t.last().map(|r| r.phi);
            s.final_gap = t.last().map(|r| r.phi - phi_ref);
            for &g in &SUMMARY_GAPS {
                s.oracle_calls_at_gap.insert(gap_key(g), t.calls_to_gap(phi_ref, g));
            }
            s.config = t.config.clone();
        }
        Err(e) => s.error = Some(e.to_string()),
    }
    s
}

/// Builds the problem once, solves for the reference, runs each method, and,
/// when `out_dir` is given, writes `<label>.csv` per method and `summary.json`.
/// A failing method is recorded in the summary; the remaining ones still run.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let prepared = prepare(&spec.problem)?;
    let phi_ref = prepared.reference.value;
    let mut traces = Vec::new();
    let mut methods = Vec::new();
    for m in &spec.methods {
        let res = run_method(&prepared, m);
        methods.push(summarize(&m.label(), m.name, &res, phi_ref));
        traces.push((m.label(), res));
    }
    let summary = ExperimentSummary {
        problem: prepared.spec.describe(),
        dimension: prepared.problem.dimension(),
        lipschitz: prepared.problem.lipschitz(),
        reference: ReferenceSummary {
            value: phi_ref,
            gap_bound: prepared.reference.gap_bound,
            certified: prepared.reference.certified,
            d0_estimate: prepared.d0,
            tol: spec.problem.ref_tol(),
        },
        methods,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        for (label, t) in &traces {
            if let Ok(t) = t {
                write_atomic(&dir.join(format!("{label}.csv")), t.to_csv().as_bytes())?;
            }
        }
        let json = serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::Parse(format!("summary serialization: {e}")))?;
        write_atomic(&dir.join("summary.json"), json.as_bytes())?;
    }
    Ok(ExperimentOutcome { traces, summary })
}

/// Write to a sibling temporary file, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs one method with full instrumentation and returns the invariant report.
pub fn verify_method(prepared: &PreparedProblem, method: &MethodSpec, seed: u64) -> Result<(VerifyReport, RunTrace)> {
    let eps = method.eps_bar();
    let lam = resolve_lambda(prepared, method);
    let options = VerifyOptions {
        seed,
        phi_ref: Some(prepared.reference.value),
        d0: Some(prepared.d0),
        rate_tol: 10.0 * prepared.spec.ref_tol(),
        ..VerifyOptions::default()
    };
    match method.name {
        MethodKind::RestartAcg => {
            let mut cfg = RestartConfig {
                stop: StopRule::ReferenceGap,
                ..RestartConfig::default()
            };
            if let Some(s) = method.sigma {
                cfg.sigma = s;
            }
            if let Some(m) = method.max_outer {
                cfg.max_outer = m;
            }
            if let Some(m) = method.max_inner {
                cfg.max_inner = m;
            }
            verify_restart_run(&prepared.problem, &prepared.x0, lam.expect("set"), eps, &cfg, options)
        }
        MethodKind::Mpb => {
            let mut cfg = HpeConfig::default();
            if let Some(m) = method.max_outer {
                cfg.max_outer = m;
            }
            if let Some(m) = method.max_inner {
                cfg.mpb.max_inner = m;
            }
            let delta = method.delta.unwrap_or(eps / 2.0);
            verify_bundle_run(&prepared.problem, &prepared.x0, lam.expect("set"), delta, eps, &cfg, options)
        }
        MethodKind::Fista | MethodKind::Subgradient => {
            let trace = run_method(prepared, method)?;
            let mut report = VerifyReport::default();
            let phi_ref = prepared.reference.value;
            for pair in trace.rows.windows(2) {
                report.record("trace.calls_nondecreasing", (pair[1].oracle_calls - pair[0].oracle_calls) as f64);
            }
            for row in &trace.rows {
                if let Some(b) = row.bound {
                    report.record("fista.rate", b + 10.0 * prepared.spec.ref_tol() - (row.phi - phi_ref));
                }
            }
            Ok((report, trace))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_spec_reports_reference_only() {
        let spec = ExperimentSpec::parse("[problem]\nkind = \"lasso\"\nrows = 20\ncols = 10\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&spec, Some(dir.path())).unwrap();
        assert!(out.summary.methods.is_empty());
        assert!(dir.path().join("summary.json").exists());
        let entries = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(entries, 1);
    }

    #[test]
    fn lasso_pair_writes_two_csvs() {
        let text = "[problem]\nkind = \"lasso\"\nrows = 40\ncols = 20\n[[method]]\nname = \"restart_acg\"\n[[method]]\nname = \"fista\"\n";
        let spec = ExperimentSpec::parse(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment(&spec, Some(dir.path())).unwrap();
        assert!(out.all_converged());
        for label in ["restart_acg", "fista"] {
            let csv = fs::read_to_string(dir.path().join(format!("{label}.csv"))).unwrap();
            assert!(csv.starts_with("k,inner_iters,oracle_calls,phi,bound,seconds\n"));
        }
        for m in &out.summary.methods {
            assert!(m.oracle_calls_at_gap["1e-4"].is_some());
        }
    }
}
