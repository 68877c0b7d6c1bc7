//! End-to-end tests of the `hplap` binary: configuration parsing
//! diagnostics, the exit-code contract, output file layout, and
//! rerun determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run_hplap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hplap"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("the binary must be runnable")
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).expect("config file written");
    path
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn report_value(text: &str, key: &str) -> Option<String> {
    let prefix = format!("{key} = ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

const SINGULAR_CFG: &str = "\
[run]
command = solve-singular

[grid]
dim = 1
extents = 0, 1
resolution = 64

[norm]
kind = euclidean

[problem]
p = 2
f = 1
q = 0.5
delta = 0.1

[solver]
seed = 0

[output]
directory = out
prefix = singular
";

#[test]
fn singular_run_succeeds_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(dir.path(), "run.cfg", SINGULAR_CFG);

    let out = run_hplap(dir.path(), &["--config", "run.cfg", "--out", "a"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    for suffix in ["field.csv", "log.csv", "report.txt"] {
        assert!(
            dir.path().join("a").join(format!("singular_{suffix}")).exists(),
            "expected output file singular_{suffix}"
        );
    }
    let report = fs::read_to_string(dir.path().join("a/singular_report.txt")).unwrap();
    assert_eq!(report_value(&report, "status").as_deref(), Some("ok"));
    assert_eq!(report_value(&report, "converged").as_deref(), Some("true"));
    let interior_min: f64 = report_value(&report, "interior_min")
        .expect("interior_min is reported")
        .parse()
        .unwrap();
    assert!(
        interior_min > 0.0,
        "the singular solution is interior-positive, got {interior_min}"
    );

    let out = run_hplap(dir.path(), &["--config", "run.cfg", "--out", "b"]);
    assert_eq!(out.status.code(), Some(0));
    for suffix in ["field.csv", "log.csv", "report.txt"] {
        let name = format!("singular_{suffix}");
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b, "rerun with the same config and seed must be byte-identical: {name}");
    }
}

#[test]
fn multiplicity_run_writes_the_two_solution_pair() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(
        dir.path(),
        "run.cfg",
        "\
[run]
command = solve-multiplicity
[grid]
dim = 2
extents = 0, 1, 0, 1
resolution = 8, 8
[norm]
kind = euclidean
[problem]
p = 1.5
q = 0.5
lambda = 0.05
r = 2
[solver]
seed = 0
eps_schedule = 1e-1, 1e-2
[output]
directory = out
prefix = pair
",
    );
    let out = run_hplap(dir.path(), &["--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    for suffix in ["nu_field.csv", "zeta_field.csv", "log.csv", "report.txt"] {
        assert!(
            dir.path().join("out").join(format!("pair_{suffix}")).exists(),
            "expected output file pair_{suffix}"
        );
    }
    let report = fs::read_to_string(dir.path().join("out/pair_report.txt")).unwrap();
    let value = |key: &str| -> f64 {
        report_value(&report, key)
            .unwrap_or_else(|| panic!("report key {key} present"))
            .parse()
            .unwrap()
    };
    assert!(value("i_nu") < 0.0, "the minimizer sits in the negative well");
    assert!(
        value("i_zeta") >= value("rho"),
        "the mountain-pass value clears the rim"
    );
    assert!(value("distinctness") > 0.01, "the two solutions are distinct");
    assert_eq!(report_value(&report, "status").as_deref(), Some("ok"));
}

#[test]
fn unknown_key_exits_1_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let broken = SINGULAR_CFG.replace("delta = 0.1", "delta = 0.1\nbogus = 3");
    write_cfg(dir.path(), "run.cfg", &broken);
    let out = run_hplap(dir.path(), &["--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(err.contains("bogus"), "names the offending key: {err}");
    assert!(err.contains("run.cfg:17"), "points at the file and line: {err}");
    assert!(
        !dir.path().join("out").exists(),
        "a rejected config must not produce output files"
    );
}

#[test]
fn unsupported_regime_is_rejected_at_parse_time() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(
        dir.path(),
        "run.cfg",
        "\
[run]
command = solve-convex
[grid]
dim = 2
extents = 0, 1, 0, 1
resolution = 8, 8
[norm]
kind = t_norm
t = 4
[problem]
p = 1.8
g = 1
",
    );
    let out = run_hplap(dir.path(), &["--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(
        err.contains("p < 2 requires the euclidean norm or the t-norm with t = p"),
        "the diagnostic states the rule in terms of what to change: {err}"
    );
}

#[test]
fn boundary_strip_exponent_rule_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let broken = SINGULAR_CFG.replace("q = 0.5", "q = 1.5");
    write_cfg(dir.path(), "run.cfg", &broken);
    let out = run_hplap(dir.path(), &["--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(
        err.contains("must not exceed 1") && err.contains("boundary"),
        "explains the strip rule: {err}"
    );
    assert!(!dir.path().join("out").exists());
}

#[test]
fn supercritical_growth_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(
        dir.path(),
        "run.cfg",
        "\
[run]
command = solve-multiplicity
[grid]
dim = 2
extents = 0, 1, 0, 1
resolution = 8, 8
[norm]
kind = euclidean
[problem]
p = 1.5
q = 0.5
lambda = 0.05
r = 6
",
    );
    let out = run_hplap(dir.path(), &["--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(
        err.contains("supercritical") && err.contains("growth cap"),
        "names the growth cap: {err}"
    );
}

#[test]
fn check_norm_writes_a_hypothesis_report() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(
        dir.path(),
        "run.cfg",
        "\
[run]
command = check-norm
[grid]
dim = 2
[norm]
kind = quartic
lambda = 1
mu = 1
[output]
prefix = quartic
",
    );
    let out = run_hplap(dir.path(), &["--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let report = fs::read_to_string(dir.path().join("quartic_report.txt")).unwrap();
    assert_eq!(report_value(&report, "pass").as_deref(), Some("true"));
    assert_eq!(report_value(&report, "h1_pass").as_deref(), Some("true"));
}

#[test]
fn eigen_reports_the_classical_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(
        dir.path(),
        "run.cfg",
        "\
[run]
command = eigen
[grid]
dim = 1
extents = 0, 1
resolution = 32
[norm]
kind = euclidean
[problem]
p = 2
[output]
directory = out
prefix = eigen
",
    );
    let out = run_hplap(dir.path(), &["--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let report = fs::read_to_string(dir.path().join("out/eigen_report.txt")).unwrap();
    let lambda1: f64 = report_value(&report, "lambda1")
        .expect("lambda1 is reported")
        .parse()
        .unwrap();
    let pi_sq = std::f64::consts::PI.powi(2);
    assert!(
        (lambda1 - pi_sq).abs() / pi_sq < 0.01,
        "lambda1 = {lambda1} should sit within 1 percent of pi^2"
    );
}

#[test]
fn iteration_cap_exits_3_with_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(
        dir.path(),
        "run.cfg",
        "\
[run]
command = solve-convex
[grid]
dim = 2
extents = 0, 1, 0, 1
resolution = 8, 8
[norm]
kind = euclidean
[problem]
p = 3
g = 1
[solver]
max_iters = 2
[output]
directory = out
prefix = stall
",
    );
    let out = run_hplap(dir.path(), &["--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
    let report = fs::read_to_string(dir.path().join("out/stall_report.txt")).unwrap();
    assert_eq!(
        report_value(&report, "status").as_deref(),
        Some("non-converged"),
        "partial outputs are labeled"
    );
    assert!(dir.path().join("out/stall_field.csv").exists());
}

#[test]
fn quiet_suppresses_stdout() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(dir.path(), "run.cfg", SINGULAR_CFG);
    let out = run_hplap(dir.path(), &["--config", "run.cfg", "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        out.stdout.is_empty(),
        "no stdout under --quiet, got: {}",
        String::from_utf8_lossy(&out.stdout)
    );
}

#[test]
fn csv_field_sources_resolve_against_the_config() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(
        dir.path(),
        "first.cfg",
        "\
[run]
command = solve-convex
[grid]
dim = 2
extents = 0, 1, 0, 1
resolution = 8, 8
[norm]
kind = euclidean
[problem]
p = 2
g = 1
[output]
directory = out
prefix = first
",
    );
    let out = run_hplap(dir.path(), &["--config", "first.cfg"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    write_cfg(
        dir.path(),
        "second.cfg",
        "\
[run]
command = solve-convex
[grid]
dim = 2
extents = 0, 1, 0, 1
resolution = 8, 8
[norm]
kind = euclidean
[problem]
p = 2
g = csv:out/first_field.csv
[output]
directory = out
prefix = second
",
    );
    let out = run_hplap(dir.path(), &["--config", "second.cfg"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "replaying an exported field as the load must work: {}",
        stderr_of(&out)
    );
    assert!(dir.path().join("out/second_field.csv").exists());
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    write_cfg(
        dir.path(),
        "run.cfg",
        "\
[run]
command = check-norm
[grid]
dim = 1
[norm]
kind = euclidean
",
    );
    let out = run_hplap(dir.path(), &["--config", "run.cfg", "--seed", "7", "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let report = fs::read_to_string(dir.path().join("run_report.txt")).unwrap();
    assert_eq!(report_value(&report, "seed").as_deref(), Some("7"));
}

#[test]
fn missing_arguments_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_hplap(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1), "a missing --config is a usage error");
    assert!(stderr_of(&out).contains("--config"));

    let out = run_hplap(dir.path(), &["--config", "does-not-exist.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr_of(&out).contains("does-not-exist.cfg"),
        "names the missing file"
    );
}
