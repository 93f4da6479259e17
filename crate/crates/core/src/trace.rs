//! Per-iteration run records and their CSV form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    /// Outer iteration (or plain iteration for single-loop methods).
    pub k: usize,
    /// Inner iterations spent in this outer step.
    pub inner_iters: usize,
    /// Cumulative `f` oracle calls.
    pub oracle_calls: usize,
    pub phi: f64,
    /// Theoretical bound on `φ − φ*` at this iteration, when one applies.
    pub bound: Option<f64>,
    /// Wall time since the start of the run.
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Converged,
    Budget,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunTrace {
    pub method: String,
    pub rows: Vec<TraceRow>,
    pub status: RunStatus,
    pub message: Option<String>,
    /// Snapshot of the parameters the run used.
    pub config: BTreeMap<String, String>,
}

impl RunTrace {
    pub const CSV_HEADER: &'static str = "k,inner_iters,oracle_calls,phi,bound,seconds";

    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            rows: Vec::new(),
            status: RunStatus::Failed,
            message: None,
            config: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn finish(&mut self, status: RunStatus, message: Option<String>) {
        self.status = status;
        self.message = message;
    }

    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn total_oracle_calls(&self) -> usize {
        self.rows.last().map_or(0, |r| r.oracle_calls)
    }

    pub fn best_phi(&self) -> f64 {
        self.rows.iter().map(|r| r.phi).fold(f64::INFINITY, f64::min)
    }

    /// Oracle calls at the first row whose value is within `gap` of `phi_ref`.
    pub fn calls_to_gap(&self, phi_ref: f64, gap: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.phi - phi_ref <= gap)
            .map(|r| r.oracle_calls)
    }

    pub fn total_inner_iters(&self) -> usize {
        self.rows.iter().map(|r| r.inner_iters).sum()
    }

    /// CSV with header `k,inner_iters,oracle_calls,phi,bound,seconds`. Values are
    /// written with 17 significant digits; a missing bound is an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let bound = r.bound.map(|b| format!("{b:.16e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{:.16e},{},{:.6}",
                r.k, r.inner_iters, r.oracle_calls, r.phi, bound, r.seconds
            );
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

/// Wall-clock helper for trace rows.
#[derive(Clone, Copy, Debug)]
pub struct Stopwatch(Instant);

impl Stopwatch {
    pub fn start() -> Self {
        Self(Instant::now())
    }

    pub fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
