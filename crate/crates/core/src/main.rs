use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use proxhpe::harness::{
    self, bench_sweep, prepare, run_experiment, run_method, verify_method, ExperimentSpec,
    MethodKind, MethodSpec, ProblemKind, ProblemSpec, DEFAULT_BENCH_EPS, OUT_DIR_ENV,
};
use proxhpe::problem::io::{write_matrix, write_vector};
use proxhpe::problem::{LassoInstance, MaxAffineInstance};
use proxhpe::restart::RestartConfig;
use proxhpe::Error;

/// Restart ACG, the proximal bundle method and their single-step baselines.
#[derive(Parser, Debug)]
#[command(name = "proxhpe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one method on one generated problem.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the generated problem data into this directory.
        #[arg(long)]
        dump_problem: Option<PathBuf>,
    },
    /// Run every method of an experiment spec (TOML).
    Compare {
        spec: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run one method with instrumentation and print the invariant report.
    Verify {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sweep eps_bar for restart ACG and report total inner iterations.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated targets.
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
    },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// lasso or maxaffine
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// restart_acg, fista, mpb or subgradient
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    eps_bar: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    max_inner: Option<usize>,
    /// Output directory; falls back to $PROXHPE_OUT_DIR.
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    reg: Option<f64>,
    #[arg(long)]
    pieces: Option<usize>,
}

impl RunArgs {
    fn problem_spec(&self) -> Result<ProblemSpec, Error> {
        let kind: ProblemKind = self.problem.as_deref().unwrap_or("lasso").parse()?;
        let mut spec = ProblemSpec::new(kind, self.seed.unwrap_or(1));
        self.apply_problem(&mut spec);
        Ok(spec)
    }

    fn apply_problem(&self, spec: &mut ProblemSpec) {
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(r) = self.rows {
            spec.rows = r;
        }
        if self.cols.is_some() {
            spec.cols = self.cols;
        }
        if let Some(r) = self.reg {
            spec.reg = r;
        }
        if let Some(p) = self.pieces {
            spec.pieces = p;
        }
    }

    fn apply_method(&self, m: &mut MethodSpec) {
        m.lambda = self.lambda.or(m.lambda);
        m.sigma = self.sigma.or(m.sigma);
        m.delta = self.delta.or(m.delta);
        m.eps_bar = self.eps_bar.or(m.eps_bar);
        m.max_outer = self.max_outer.or(m.max_outer);
        m.max_inner = self.max_inner.or(m.max_inner);
    }

    fn method_spec(&self, kind: ProblemKind) -> Result<MethodSpec, Error> {
        let name = match &self.method {
            Some(m) => m.parse()?,
            None if kind == ProblemKind::Lasso => MethodKind::RestartAcg,
            None => MethodKind::Mpb,
        };
        let mut m = MethodSpec::new(name);
        self.apply_method(&mut m);
        Ok(m)
    }
}

enum Failure {
    Usage(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::Parse(_)
            | Error::WrongProblemKind(_)
            | Error::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
            other => Failure::Solver(other.to_string()),
        }
    }
}

fn checked_spec(problem: ProblemSpec, methods: Vec<MethodSpec>) -> Result<ExperimentSpec, Failure> {
    let spec = ExperimentSpec {
        out_dir: None,
        problem,
        methods,
    };
    spec.validate()?;
    Ok(spec)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Solver(e.to_string()))?;
    harness::write_atomic(&dir.join(name), text.as_bytes())?;
    Ok(())
}

fn dump_problem(spec: &ProblemSpec, dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Solver(e.to_string()))?;
    let file = |name: &str| -> Result<BufWriter<fs::File>, Failure> {
        fs::File::create(dir.join(name))
            .map(BufWriter::new)
            .map_err(|e| Failure::Solver(e.to_string()))
    };
    match spec.kind {
        ProblemKind::Lasso => {
            let inst = LassoInstance::generate(spec.seed, spec.rows, spec.cols(), spec.reg)?;
            write_matrix(file("A.txt")?, &inst.a)?;
            write_vector(file("b.txt")?, &inst.b)?;
        }
        ProblemKind::Maxaffine => {
            let inst = MaxAffineInstance::generate(spec.seed, spec.pieces, spec.cols())?;
            write_matrix(file("slopes.txt")?, &inst.slopes)?;
            write_vector(file("offsets.txt")?, &inst.offsets)?;
        }
    }
    Ok(())
}

fn solve(run: &RunArgs, dump: Option<&Path>) -> Result<(), Failure> {
    let pspec = run.problem_spec()?;
    let method = run.method_spec(pspec.kind)?;
    let spec = checked_spec(pspec, vec![method.clone()])?;
    if let Some(dir) = dump {
        dump_problem(&spec.problem, dir)?;
    }
    let prepared = prepare(&spec.problem)?;
    let trace = run_method(&prepared, &method)?;
    let last = trace.last();
    println!(
        "{} on {}: status={:?} iterations={} oracle_calls={} phi={:.12e} gap={:.3e}",
        trace.method,
        spec.problem.describe(),
        trace.status,
        last.map_or(0, |r| r.k),
        trace.total_oracle_calls(),
        last.map_or(f64::NAN, |r| r.phi),
        last.map_or(f64::NAN, |r| r.phi - prepared.reference.value),
    );
    if let Some(dir) = &run.out_dir {
        write_text(dir, &format!("{}.csv", trace.method), &trace.to_csv())?;
    }
    if trace.converged() {
        Ok(())
    } else {
        Err(Failure::Solver(trace.message.unwrap_or_else(|| "did not converge".into())))
    }
}

fn compare(path: &Path, run: &RunArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut spec = ExperimentSpec::parse(&text)?;
    if let Some(p) = &run.problem {
        let kind: ProblemKind = p.parse()?;
        if kind != spec.problem.kind {
            return Err(Failure::Usage(format!(
                "--problem {p} conflicts with the spec's problem kind"
            )));
        }
    }
    run.apply_problem(&mut spec.problem);
    if let Some(m) = &run.method {
        let kind: MethodKind = m.parse()?;
        spec.methods.retain(|s| s.name == kind);
    }
    for m in &mut spec.methods {
        run.apply_method(m);
    }
    spec.validate()?;
    let out_dir = run.out_dir.clone().or_else(|| spec.out_dir.clone());
    let outcome = run_experiment(&spec, out_dir.as_deref())?;
    let s = &outcome.summary;
    println!(
        "{}: phi_ref={:.12e} (gap bound {:.1e}, {})",
        s.problem,
        s.reference.value,
        s.reference.gap_bound,
        if s.reference.certified { "certified" } else { "uncertified" }
    );
    for m in &s.methods {
        let calls: Vec<String> = m
            .oracle_calls_at_gap
            .iter()
            .map(|(g, c)| format!("{g}:{}", c.map_or("-".to_string(), |c| c.to_string())))
            .collect();
        match &m.error {
            Some(e) => println!("  {:<16} error: {e}", m.label),
            None => println!(
                "  {:<16} status={:?} oracle_calls={} calls_at_gap[{}]",
                m.label,
                m.status.expect("set when no error"),
                m.total_oracle_calls,
                calls.join(" ")
            ),
        }
    }
    if outcome.all_converged() {
        Ok(())
    } else {
        Err(Failure::Solver("at least one method did not converge".into()))
    }
}

fn verify(run: &RunArgs) -> Result<(), Failure> {
    let pspec = run.problem_spec()?;
    let method = run.method_spec(pspec.kind)?;
    let spec = checked_spec(pspec, vec![method.clone()])?;
    let prepared = prepare(&spec.problem)?;
    let (report, trace) = verify_method(&prepared, &method, spec.problem.seed)?;
    print!("{report}");
    if let Some(dir) = &run.out_dir {
        write_text(dir, "verify_report.txt", &report.to_string())?;
        write_text(dir, &format!("{}.csv", trace.method), &trace.to_csv())?;
    }
    if !report.all_passed() {
        return Err(Failure::Solver("invariant checks failed".into()));
    }
    if !trace.converged() {
        return Err(Failure::Solver(trace.message.unwrap_or_else(|| "did not converge".into())));
    }
    Ok(())
}

fn bench(run: &RunArgs, eps_list: Option<&[f64]>) -> Result<(), Failure> {
    let pspec = run.problem_spec()?;
    if let Some(m) = &run.method {
        if m.parse::<MethodKind>()? != MethodKind::RestartAcg {
            return Err(Failure::Usage("bench sweeps restart_acg only".into()));
        }
    }
    let spec = checked_spec(pspec, vec![MethodSpec::new(MethodKind::RestartAcg)])?;
    let prepared = prepare(&spec.problem)?;
    let mut cfg = RestartConfig::default();
    if let Some(s) = run.sigma {
        cfg.sigma = s;
    }
    if let Some(m) = run.max_outer {
        cfg.max_outer = m;
    }
    if let Some(m) = run.max_inner {
        cfg.max_inner = m;
    }
    let eps: Vec<f64> = match (eps_list, run.eps_bar) {
        (Some(list), _) => list.to_vec(),
        (None, Some(e)) => vec![e],
        (None, None) => DEFAULT_BENCH_EPS.to_vec(),
    };
    let report = bench_sweep(&prepared, &eps, run.lambda, &cfg)?;
    print!("{}", report.to_csv());
    println!("spread={:.4}", report.spread);
    if let Some(dir) = &run.out_dir {
        write_text(dir, "bench.csv", &report.to_csv())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { run, dump_problem } => solve(run, dump_problem.as_deref()),
        Command::Compare { spec, run } => compare(spec, run),
        Command::Verify { run } => verify(run),
        Command::Bench { run, eps_list } => bench(run, eps_list.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("failure: {msg}");
            ExitCode::from(1)
        }
    }
}
