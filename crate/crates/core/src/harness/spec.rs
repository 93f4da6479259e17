//! Experiment descriptions.
//!
//! Specs are TOML documents with one `[problem]` table and any number of
//! `[[method]]` tables:
//!
//! ```toml
//! out_dir = "runs/lasso"      # optional
//!
//! [problem]
//! kind = "lasso"              # or "maxaffine"
//! seed = 1
//! rows = 80                   # lasso only
//! cols = 50
//! reg = 0.1                   # lasso only
//! pieces = 10                 # maxaffine only
//! ref_tol = 1e-10             # optional
//!
//! [[method]]
//! name = "restart_acg"        # restart_acg | fista | mpb | subgradient
//! eps_bar = 1e-4
//! lambda = 2.5                # optional, defaults to the rule for the method
//! ```
//!
//! Other per-method keys: `label`, `sigma`, `delta`, `max_outer`, `max_inner`,
//! `max_iters`, `budget_constant`. Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::problem::{make_lasso, make_maxaffine, CompositeProblem};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Lasso,
    Maxaffine,
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(Self::Lasso),
            "maxaffine" | "max-affine" | "max_affine" => Ok(Self::Maxaffine),
            other => Err(Error::invalid(format!(
                "unknown problem {other:?} (expected lasso or maxaffine)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_rows")]
    pub rows: usize,
    #[serde(default)]
    pub cols: Option<usize>,
    #[serde(default = "default_reg")]
    pub reg: f64,
    #[serde(default = "default_pieces")]
    pub pieces: usize,
    #[serde(default)]
    pub ref_tol: Option<f64>,
}

fn default_seed() -> u64 {
    1
}
fn default_rows() -> usize {
    80
}
fn default_reg() -> f64 {
    0.1
}
fn default_pieces() -> usize {
    10
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            rows: default_rows(),
            cols: None,
            reg: default_reg(),
            pieces: default_pieces(),
            ref_tol: None,
        }
    }

    /// 50 columns for LASSO, 20 for max-affine unless set.
    pub fn cols(&self) -> usize {
        self.cols.unwrap_or(match self.kind {
            ProblemKind::Lasso => 50,
            ProblemKind::Maxaffine => 20,
        })
    }

    pub fn ref_tol(&self) -> f64 {
        self.ref_tol.unwrap_or(match self.kind {
            ProblemKind::Lasso => 1e-10,
            ProblemKind::Maxaffine => 1e-8,
        })
    }

    pub fn build(&self) -> Result<CompositeProblem> {
        match self.kind {
            ProblemKind::Lasso => make_lasso(self.seed, self.rows, self.cols(), self.reg),
            ProblemKind::Maxaffine => make_maxaffine(self.seed, self.pieces, self.cols()),
        }
    }

    pub fn describe(&self) -> String {
        match self.kind {
            ProblemKind::Lasso => format!(
                "lasso(seed={}, rows={}, cols={}, reg={})",
                self.seed,
                self.rows,
                self.cols(),
                self.reg
            ),
            ProblemKind::Maxaffine => format!(
                "maxaffine(seed={}, pieces={}, cols={})",
                self.seed,
                self.pieces,
                self.cols()
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    RestartAcg,
    Fista,
    Mpb,
    Subgradient,
}

impl MethodKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::RestartAcg => "restart_acg",
            Self::Fista => "fista",
            Self::Mpb => "mpb",
            Self::Subgradient => "subgradient",
        }
    }

    pub fn needs_smooth(self) -> bool {
        matches!(self, Self::RestartAcg | Self::Fista)
    }
}

impl std::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "restart_acg" | "restart-acg" => Ok(Self::RestartAcg),
            "fista" => Ok(Self::Fista),
            "mpb" | "bundle" => Ok(Self::Mpb),
            "subgradient" => Ok(Self::Subgradient),
            other => Err(Error::invalid(format!(
                "unknown method {other:?} (expected restart_acg, fista, mpb or subgradient)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: MethodKind,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub eps_bar: Option<f64>,
    #[serde(default)]
    pub max_outer: Option<usize>,
    #[serde(default)]
    pub max_inner: Option<usize>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub budget_constant: Option<f64>,
}

impl MethodSpec {
    pub fn new(name: MethodKind) -> Self {
        Self {
            name,
            label: None,
            lambda: None,
            sigma: None,
            delta: None,
            eps_bar: None,
            max_outer: None,
            max_inner: None,
            max_iters: None,
            budget_constant: None,
        }
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.name.as_str().to_string())
    }

    /// `1e-4` for smooth methods, `1e-2` for nonsmooth ones.
    pub fn eps_bar(&self) -> f64 {
        self.eps_bar.unwrap_or(if self.name.needs_smooth() { 1e-4 } else { 1e-2 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub problem: ProblemSpec,
    #[serde(default, rename = "method")]
    pub methods: Vec<MethodSpec>,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if p.rows == 0 || p.cols() == 0 || p.pieces == 0 {
            return Err(Error::invalid("problem dimensions must be >= 1"));
        }
        if !(p.reg >= 0.0) {
            return Err(Error::invalid("reg must be >= 0"));
        }
        if !(p.ref_tol() > 0.0) {
            return Err(Error::invalid("ref_tol must be positive"));
        }
        let smooth = p.kind == ProblemKind::Lasso;
        let mut labels = std::collections::BTreeSet::new();
        for m in &self.methods {
            if m.name.needs_smooth() != smooth {
                return Err(Error::invalid(format!(
                    "method {} does not apply to a {} problem",
                    m.name.as_str(),
                    if smooth { "smooth" } else { "nonsmooth" }
                )));
            }
            let label = m.label();
            if label.is_empty() || label.contains(['/', '\\']) {
                return Err(Error::invalid(format!("bad method label {label:?}")));
            }
            if !labels.insert(label.clone()) {
                return Err(Error::invalid(format!("duplicate method label {label:?}")));
            }
            for (key, v) in [
                ("lambda", m.lambda),
                ("delta", m.delta),
                ("eps_bar", m.eps_bar),
                ("budget_constant", m.budget_constant),
            ] {
                if let Some(v) = v {
                    if !(v > 0.0) {
                        return Err(Error::invalid(format!("{key} must be positive, got {v}")));
                    }
                }
            }
            if let Some(s) = m.sigma {
                if !(s > 0.0 && s < 1.0) {
                    return Err(Error::invalid(format!("sigma must lie in (0,1), got {s}")));
                }
            }
        }
        Ok(())
    }
}
