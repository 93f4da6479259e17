use std::path::Path;
use std::process::{Command, Output};

fn proxhpe(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_proxhpe"));
    cmd.args(args).env_remove("PROXHPE_OUT_DIR");
    if let Some(dir) = out_env {
        cmd.env("PROXHPE_OUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

#[test]
fn solve_lasso_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = proxhpe(
        &["solve", "--problem", "lasso", "--seed", "3", "--eps-bar", "1e-5", "--out-dir", out_dir],
        None,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("restart_acg.csv")).unwrap();
    assert!(csv.starts_with("k,inner_iters,oracle_calls,phi,bound,seconds\n"));
    assert!(csv.lines().count() > 1);
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = proxhpe(
        &["solve", "--problem", "maxaffine", "--method", "mpb", "--seed", "2"],
        Some(dir.path()),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("mpb.csv").exists());
}

#[test]
fn flag_overrides_env_var() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let out = proxhpe(
        &[
            "solve",
            "--problem",
            "lasso",
            "--method",
            "fista",
            "--out-dir",
            flag_dir.path().to_str().unwrap(),
        ],
        Some(env_dir.path()),
    );
    assert_eq!(code(&out), 0);
    assert!(flag_dir.path().join("fista.csv").exists());
    assert!(!env_dir.path().join("fista.csv").exists());
}

#[test]
fn usage_errors_exit_2() {
    let cases: &[&[&str]] = &[
        &["solve", "--problem", "quadratic"],
        &["solve", "--problem", "lasso", "--method", "mpb"],
        &["solve", "--problem", "lasso", "--sigma", "1.5"],
        &["solve", "--problem", "lasso", "--eps-bar", "-1"],
        &["solve", "--bogus-flag"],
        &["frobnicate"],
        &["compare", "/nonexistent/spec.toml"],
    ];
    for args in cases {
        let out = proxhpe(args, None);
        assert_eq!(code(&out), 2, "args {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn bad_spec_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    std::fs::write(&spec, "[problem]\nkind = \"lasso\"\nunknown = 1\n").unwrap();
    let out = proxhpe(&["compare", spec.to_str().unwrap()], None);
    assert_eq!(code(&out), 2);
}

#[test]
fn exhausted_budget_exits_1() {
    let out = proxhpe(
        &["solve", "--problem", "lasso", "--eps-bar", "1e-9", "--max-outer", "1", "--lambda", "0.01"],
        None,
    );
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stdout));
    let out = proxhpe(
        &["solve", "--problem", "lasso", "--max-inner", "1", "--lambda", "100"],
        None,
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn compare_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        "[problem]\nkind = \"maxaffine\"\nseed = 4\n\n[[method]]\nname = \"mpb\"\n\n[[method]]\nname = \"subgradient\"\nlabel = \"sg\"\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = proxhpe(
        &["compare", spec.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["mpb.csv", "sg.csv", "summary.json"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary.is_object());
}

#[test]
fn verify_and_bench_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = proxhpe(&["verify", "--problem", "maxaffine", "--out-dir", out_dir], None);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report = std::fs::read_to_string(dir.path().join("verify_report.txt")).unwrap();
    assert!(report.contains("PASS") && !report.contains("FAIL"));

    let out = proxhpe(
        &["bench", "--problem", "lasso", "--eps-list", "1e-2,1e-3", "--out-dir", out_dir],
        None,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn dump_problem_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = proxhpe(
        &["solve", "--problem", "lasso", "--seed", "5", "--dump-problem", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(code(&out), 0);
    let a = proxhpe::problem::io::read_matrix(std::io::BufReader::new(std::fs::File::open(dir.path().join("A.txt")).unwrap())).unwrap();
    let inst = proxhpe::problem::LassoInstance::generate(5, 80, 50, 0.1).unwrap();
    assert_eq!(a, inst.a);
}
