//! Scenario dispatch and output emission.
//!
//! Build the problem objects from a validated configuration, run the
//! selected pipeline, print a one-line summary per phase (unless
//! quieted), and write the output files through the library's atomic
//! CSV/report writers. Every failure is classified onto the exit-code
//! contract: 1 for configuration and usage problems, 2 for violated
//! run-time invariants, 3 for non-convergence. Non-convergence of the
//! convex, eigenpair, and truncation pipelines still writes the partial
//! outputs (marked by the `status` report line) before exiting.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use hplap::io::{self, IoError};
use hplap::{
    continuation, eigenpair, solve_dirichlet, solve_singular, ContinuationOptions, EnergyError,
    FinslerNorm, Grid, MpPathOptions, MultiplicityError, NormKind, PerturbedProblem, ScalarField,
    SingularError, SingularOptions, SingularProblem, SolveError, SolveOptions, SolverReport,
};
use thiserror::Error;

use crate::config::{Command, ConfigError, FieldSpec, RunConfig};

/// A run failure, classified for the exit-code contract.
#[derive(Debug, Error)]
pub enum CliError {
    /// Configuration parsing or validation failure (exit 1).
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// A downstream validator rejected the configuration (exit 1).
    #[error("{0}")]
    Invalid(String),
    /// A run-time invariant was violated (exit 2).
    #[error("{0}")]
    Invariant(String),
    /// A pipeline stopped without reaching its tolerance (exit 3).
    #[error("{0}")]
    NonConvergence(String),
    /// Output files could not be written (exit 1).
    #[error("cannot write outputs: {0}")]
    Output(String),
}

impl CliError {
    /// The process exit code for this failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) | CliError::Output(_) => 1,
            CliError::Invariant(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

fn output_err(e: IoError) -> CliError {
    CliError::Output(e.to_string())
}

fn classify_energy(e: &EnergyError) -> CliError {
    match e {
        EnergyError::BoundaryNotZero => CliError::Invariant(e.to_string()),
        _ => CliError::Invalid(e.to_string()),
    }
}

fn classify_solve(e: SolveError) -> CliError {
    let msg = e.to_string();
    match e {
        SolveError::Energy(inner) => classify_energy(&inner),
        SolveError::InvalidOptions(_) => CliError::Invalid(msg),
        SolveError::NonConvergence { .. } => CliError::NonConvergence(msg),
    }
}

fn classify_singular(e: SingularError) -> CliError {
    let msg = e.to_string();
    match e {
        SingularError::Energy(inner) => classify_energy(&inner),
        SingularError::Solve(inner) => classify_solve(inner),
        SingularError::InvalidParameter(_) | SingularError::EmptyInteriorSet { .. } => {
            CliError::Invalid(msg)
        }
        SingularError::FixedPointExhausted { .. } => CliError::NonConvergence(msg),
        SingularError::MonotonicityBroken { .. } => CliError::Invariant(msg),
    }
}

fn classify_multiplicity(e: MultiplicityError) -> CliError {
    let msg = e.to_string();
    match e {
        MultiplicityError::Energy(inner) => classify_energy(&inner),
        MultiplicityError::Solve(inner) => classify_solve(inner),
        MultiplicityError::InvalidParameter(_) | MultiplicityError::Supercritical { .. } => {
            CliError::Invalid(msg)
        }
        MultiplicityError::MountainPassStalled { .. } => CliError::NonConvergence(msg),
        MultiplicityError::NegativeWellNotFound { .. }
        | MultiplicityError::StationarityNotCertified { .. }
        | MultiplicityError::GeometryFailure { .. }
        | MultiplicityError::BarrierViolated { .. }
        | MultiplicityError::InvariantViolated(_) => CliError::Invariant(msg),
    }
}

fn phase(quiet: bool, line: String) {
    if !quiet {
        println!("{line}");
    }
}

/// Human-readable norm description for summaries and reports.
fn norm_label(kind: NormKind) -> String {
    match kind {
        NormKind::Euclidean => "euclidean".to_string(),
        NormKind::TNorm { t } => format!("t_norm(t = {t})"),
        NormKind::Quartic { lambda, mu } => format!("quartic(lambda = {lambda}, mu = {mu})"),
    }
}

fn build_norm(dim: usize, kind: NormKind) -> Result<FinslerNorm, CliError> {
    let norm = match kind {
        NormKind::Euclidean => FinslerNorm::euclidean(dim),
        NormKind::TNorm { t } => FinslerNorm::t_norm(dim, t),
        NormKind::Quartic { lambda, mu } => FinslerNorm::quartic(dim, lambda, mu),
    };
    norm.map_err(|e| CliError::Invalid(format!("invalid [norm] configuration: {e}")))
}

fn build_grid(cfg: &RunConfig) -> Result<Arc<Grid>, CliError> {
    Grid::build(&cfg.grid.extents, &cfg.grid.resolution)
        .map_err(|e| CliError::Invalid(format!("invalid [grid] configuration: {e}")))
}

fn build_field(spec: &FieldSpec, grid: &Arc<Grid>, key: &str) -> Result<ScalarField, CliError> {
    match spec {
        FieldSpec::Expr(expr) => ScalarField::from_fn(grid.clone(), |c| expr.eval(c))
            .map_err(|e| {
                CliError::Invalid(format!(
                    "field '{key}' could not be built from its expression: {e}"
                ))
            }),
        FieldSpec::Csv(path) => io::read_field_csv(path, grid)
            .map_err(|e| CliError::Invalid(format!("field '{key}' could not be read: {e}"))),
    }
}

/// Descent options shared by the convex, eigenpair, and truncation
/// inner solves, seeded from the configuration.
fn solve_options(cfg: &RunConfig) -> SolveOptions {
    let d = SolveOptions::default();
    SolveOptions {
        tol_grad: cfg.solver.tol_grad.unwrap_or(d.tol_grad),
        max_iters: cfg.solver.max_iters.unwrap_or(d.max_iters),
        seed: cfg.solver.seed,
        ..d
    }
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| {
        CliError::Output(format!("cannot create directory {}: {e}", cfg.out_dir.display()))
    })
}

fn out_path(cfg: &RunConfig, suffix: &str) -> PathBuf {
    cfg.out_dir.join(format!("{}_{suffix}", cfg.prefix))
}

/// Ordered `key = value` report accumulator.
struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    fn common(cfg: &RunConfig) -> Self {
        let mut r = Report { entries: Vec::new() };
        r.push("command", cfg.command.name());
        r.push("grid_dim", cfg.grid.dim.to_string());
        if !cfg.grid.extents.is_empty() {
            let extents = cfg
                .grid
                .extents
                .iter()
                .map(|(a, b)| format!("{a},{b}"))
                .collect::<Vec<_>>()
                .join(",");
            r.push("grid_extents", extents);
            let res = cfg
                .grid
                .resolution
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",");
            r.push("grid_resolution", res);
        }
        r.push("norm", norm_label(cfg.norm));
        if let Some(p) = cfg.p {
            r.push("p", p.to_string());
        }
        r.push("seed", cfg.solver.seed.to_string());
        r
    }

    fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }

    fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, io::fmt_float(value));
    }

    fn write(&self, path: &std::path::Path) -> Result<(), CliError> {
        io::write_report_txt(path, &self.entries).map_err(output_err)
    }
}

/// Run the configured command; the caller maps the error onto the exit
/// code.
pub fn run(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    match cfg.command {
        Command::CheckNorm => check_norm(cfg, quiet),
        Command::SolveConvex => solve_convex(cfg, quiet),
        Command::Eigen => eigen_cmd(cfg, quiet),
        Command::SolveSingular => solve_singular_cmd(cfg, quiet),
        Command::SolveMultiplicity => solve_multiplicity_cmd(cfg, quiet),
    }
}

fn check_norm(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let norm = build_norm(cfg.grid.dim, cfg.norm)?;
    let samples = cfg.solver.samples.unwrap_or(1000);
    let tol = cfg.solver.tol_check.unwrap_or(1e-6);
    phase(
        quiet,
        format!("norm: {} in dimension {}", norm_label(cfg.norm), cfg.grid.dim),
    );
    let report = norm.verify_hypotheses(samples, cfg.solver.seed, tol);
    let ok = report.pass();
    phase(
        quiet,
        format!("hypotheses: pass = {ok} over {samples} samples at tolerance {tol:e}"),
    );

    ensure_out_dir(cfg)?;
    let mut r = Report::common(cfg);
    r.push("samples", samples.to_string());
    r.push_f64("tol", tol);
    r.push("h1_pass", report.h1_pass.to_string());
    r.push_f64("h2_max_violation", report.h2_max_violation);
    r.push_f64("euler_max_rel_error", report.euler_max_rel_error);
    r.push_f64("h4_min_hessian_eigenvalue", report.h4_min_hessian_eigenvalue);
    r.push("hessian_skipped", report.hessian_skipped.to_string());
    r.push_f64("dual_norm_max_error", report.dual_norm_max_error);
    r.push("pass", ok.to_string());
    r.push("status", if ok { "ok" } else { "hypotheses-failed" });
    let report_path = out_path(cfg, "report.txt");
    r.write(&report_path)?;
    phase(quiet, format!("wrote {}", report_path.display()));

    if ok {
        Ok(())
    } else {
        Err(CliError::Invariant(format!(
            "norm hypothesis verification failed at tolerance {tol:e}; \
             see {}",
            report_path.display()
        )))
    }
}

fn write_descent_outputs(
    cfg: &RunConfig,
    quiet: bool,
    u: &ScalarField,
    rep: &SolverReport,
    extra: &[(&str, String)],
    status: &str,
) -> Result<(), CliError> {
    ensure_out_dir(cfg)?;
    let field_path = out_path(cfg, "field.csv");
    let log_path = out_path(cfg, "log.csv");
    let report_path = out_path(cfg, "report.txt");
    io::write_field_csv(&field_path, u).map_err(output_err)?;
    io::write_log_csv(&log_path, rep).map_err(output_err)?;
    let mut r = Report::common(cfg);
    for (key, value) in extra {
        r.push(key, value.clone());
    }
    r.push("iterations", rep.iterations.to_string());
    r.push("converged", rep.converged.to_string());
    r.push_f64("final_energy", rep.final_energy);
    r.push_f64("final_grad_norm", rep.final_grad_norm);
    r.push_f64("linf_norm", rep.linf_norm);
    r.push_f64("positivity_min", rep.positivity_min);
    r.push("status", status);
    r.write(&report_path)?;
    phase(
        quiet,
        format!(
            "wrote {}, {}, {}",
            field_path.display(),
            log_path.display(),
            report_path.display()
        ),
    );
    Ok(())
}

fn solve_convex(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let grid = build_grid(cfg)?;
    let norm = build_norm(cfg.grid.dim, cfg.norm)?;
    let p = cfg.p.expect("the parser guarantees p for solve commands");
    let g_spec = cfg.g.as_ref().expect("the parser guarantees g for solve-convex");
    let g = build_field(g_spec, &grid, "g")?;
    let opts = solve_options(cfg);
    phase(
        quiet,
        format!(
            "problem: dirichlet energy minimization, p = {p}, {} norm, {} nodes",
            norm_label(cfg.norm),
            grid.node_count()
        ),
    );
    match solve_dirichlet(&grid, norm, p, &g, &opts) {
        Ok((u, rep)) => {
            phase(
                quiet,
                format!(
                    "solve: converged in {} iterations, energy = {:.9e}, gradient max-norm = {:.3e}",
                    rep.iterations, rep.final_energy, rep.final_grad_norm
                ),
            );
            write_descent_outputs(cfg, quiet, &u, &rep, &[], "ok")
        }
        Err(SolveError::NonConvergence { context, field, report }) => {
            phase(
                quiet,
                format!(
                    "solve: stopped after {} iterations with gradient max-norm {:.3e}",
                    report.iterations, report.final_grad_norm
                ),
            );
            write_descent_outputs(cfg, quiet, &field, &report, &[], "non-converged")?;
            Err(CliError::NonConvergence(format!(
                "{context}: gradient max-norm {:.3e} after {} iterations; \
                 partial outputs were written",
                report.final_grad_norm, report.iterations
            )))
        }
        Err(e) => Err(classify_solve(e)),
    }
}

fn eigen_cmd(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let grid = build_grid(cfg)?;
    let norm = build_norm(cfg.grid.dim, cfg.norm)?;
    let p = cfg.p.expect("the parser guarantees p for solve commands");
    let opts = solve_options(cfg);
    phase(
        quiet,
        format!(
            "problem: first eigenpair, p = {p}, {} norm, {} nodes",
            norm_label(cfg.norm),
            grid.node_count()
        ),
    );
    match eigenpair(&grid, norm, p, &opts) {
        Ok((lambda1, e1, rep)) => {
            phase(
                quiet,
                format!(
                    "eigenpair: lambda1 = {:.9e} in {} iterations, gradient max-norm = {:.3e}",
                    lambda1, rep.iterations, rep.final_grad_norm
                ),
            );
            let extra = [("lambda1", io::fmt_float(lambda1))];
            write_descent_outputs(cfg, quiet, &e1, &rep, &extra, "ok")
        }
        Err(SolveError::NonConvergence { context, field, report }) => {
            phase(
                quiet,
                format!(
                    "eigenpair: stopped after {} iterations with gradient max-norm {:.3e}",
                    report.iterations, report.final_grad_norm
                ),
            );
            write_descent_outputs(cfg, quiet, &field, &report, &[], "non-converged")?;
            Err(CliError::NonConvergence(format!(
                "{context}: gradient max-norm {:.3e} after {} iterations; \
                 partial outputs were written",
                report.final_grad_norm, report.iterations
            )))
        }
        Err(e) => Err(classify_solve(e)),
    }
}

fn solve_singular_cmd(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let grid = build_grid(cfg)?;
    let norm = build_norm(cfg.grid.dim, cfg.norm)?;
    let p = cfg.p.expect("the parser guarantees p for solve commands");
    let delta = cfg.delta.expect("the parser guarantees delta for solve-singular");
    let f_spec = cfg.f.as_ref().expect("the parser guarantees f for solve-singular");
    let q_spec = cfg.q.as_ref().expect("the parser guarantees q for solve-singular");
    let f = build_field(f_spec, &grid, "f")?;
    let q = build_field(q_spec, &grid, "q")?;
    let prob = SingularProblem::new(grid.clone(), norm, p, f, q, delta)
        .map_err(classify_singular)?;

    let d = SingularOptions::default();
    let opts = SingularOptions {
        tol_outer: cfg.solver.tol_outer.unwrap_or(d.tol_outer),
        n_schedule: cfg.solver.n_schedule.clone().unwrap_or(d.n_schedule),
        tol_fp: cfg.solver.tol_fp.unwrap_or(d.tol_fp),
        max_fp_iters: cfg.solver.max_fp_iters.unwrap_or(d.max_fp_iters),
        inner: solve_options(cfg),
    };
    phase(
        quiet,
        format!(
            "problem: singular load, p = {p}, delta = {delta}, {} norm, {} nodes",
            norm_label(cfg.norm),
            grid.node_count()
        ),
    );

    match solve_singular(&prob, &opts) {
        Ok((u, rep)) => {
            let last = rep.levels.last().expect("the schedule runs at least one level");
            phase(
                quiet,
                format!(
                    "levels: {} run, final n = {}, outer gap = {:.3e}, monotone drop = {:.3e}",
                    rep.levels.len(),
                    last.n,
                    last.outer_gap,
                    rep.monotonicity_worst
                ),
            );
            phase(
                quiet,
                format!(
                    "field: interior min = {:.6e}, seminorm = {:.6e}, weak residual = {:.3e}",
                    rep.final_interior_min, rep.final_seminorm, rep.weak_residual_sup
                ),
            );

            ensure_out_dir(cfg)?;
            let field_path = out_path(cfg, "field.csv");
            let log_path = out_path(cfg, "log.csv");
            let report_path = out_path(cfg, "report.txt");
            io::write_field_csv(&field_path, &u).map_err(output_err)?;
            io::write_singular_levels_csv(&log_path, &rep).map_err(output_err)?;
            let mut r = Report::common(cfg);
            r.push("delta", delta.to_string());
            r.push("levels_run", rep.levels.len().to_string());
            r.push("final_n", last.n.to_string());
            r.push("converged", rep.converged.to_string());
            r.push("schedule_exhausted", rep.schedule_exhausted.to_string());
            r.push_f64("outer_gap_last", last.outer_gap);
            r.push_f64("monotonicity_worst", rep.monotonicity_worst);
            r.push_f64("weak_residual_sup", rep.weak_residual_sup);
            r.push_f64("interior_min", rep.final_interior_min);
            r.push_f64("seminorm", rep.final_seminorm);
            r.push("status", if rep.converged { "ok" } else { "schedule-exhausted" });
            r.write(&report_path)?;
            phase(
                quiet,
                format!(
                    "wrote {}, {}, {}",
                    field_path.display(),
                    log_path.display(),
                    report_path.display()
                ),
            );

            if rep.converged {
                Ok(())
            } else {
                Err(CliError::NonConvergence(format!(
                    "the truncation schedule was exhausted at n = {} before the outer \
                     tolerance {:.1e} was met (last gap {:.3e}); outputs were written",
                    last.n, opts.tol_outer, last.outer_gap
                )))
            }
        }
        Err(e) => Err(classify_singular(e)),
    }
}

fn solve_multiplicity_cmd(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let grid = build_grid(cfg)?;
    let norm = build_norm(cfg.grid.dim, cfg.norm)?;
    let p = cfg.p.expect("the parser guarantees p for solve commands");
    let lambda = cfg.lambda.expect("the parser guarantees lambda for solve-multiplicity");
    let r_exp = cfg.r.expect("the parser guarantees r for solve-multiplicity");
    let q_spec = cfg.q.as_ref().expect("the parser guarantees q for solve-multiplicity");
    let q = build_field(q_spec, &grid, "q")?;
    let prob = PerturbedProblem::new(grid.clone(), norm, p, q, r_exp, lambda)
        .map_err(classify_multiplicity)?;

    let d = ContinuationOptions::default();
    let pd = MpPathOptions::default();
    let inner = SolveOptions {
        tol_grad: cfg.solver.tol_grad.unwrap_or(d.inner.tol_grad),
        max_iters: cfg.solver.max_iters.unwrap_or(d.inner.max_iters),
        seed: cfg.solver.seed,
        ..d.inner
    };
    let copts = ContinuationOptions {
        eps_schedule: cfg.solver.eps_schedule.clone().unwrap_or(d.eps_schedule),
        k: cfg.solver.k.unwrap_or(d.k),
        probe_count: cfg.solver.probe_count.unwrap_or(d.probe_count),
        seed: cfg.solver.seed,
        inner,
        path: MpPathOptions {
            segments: cfg.solver.segments.unwrap_or(pd.segments),
            max_deform_iters: cfg.solver.max_deform_iters.unwrap_or(pd.max_deform_iters),
            descent_step: cfg.solver.descent_step.unwrap_or(pd.descent_step),
            rho_floor: pd.rho_floor,
            refine_rounds: cfg.solver.refine_rounds.unwrap_or(pd.refine_rounds),
        },
    };
    phase(
        quiet,
        format!(
            "problem: singular plus superlinear coupling, p = {p}, r = {r_exp}, \
             lambda = {lambda}, {} norm, {} nodes",
            norm_label(cfg.norm),
            grid.node_count()
        ),
    );

    match continuation(&prob, &copts) {
        Ok(out) => {
            let c = &out.constants;
            phase(
                quiet,
                format!(
                    "geometry: radius = {:.4}, rho = {:.4}, lambda_hat = {:.4}, \
                     endpoint scale = {:.4}",
                    c.radius, c.rho, c.lambda_hat, c.endpoint_scale
                ),
            );
            let last = out.pairs.last().expect("the schedule runs at least one level");
            phase(
                quiet,
                format!(
                    "continuation: {} levels down to eps = {:.1e}, distinctness = {:.4}, \
                     seminorm drift = {:.3e}",
                    out.pairs.len(),
                    last.epsilon,
                    out.distinctness,
                    out.theta_last_rel_change
                ),
            );
            phase(
                quiet,
                format!(
                    "residuals: minimizer = {:.3e}, mountain pass = {:.3e}",
                    out.weak_residual_nu, out.weak_residual_zeta
                ),
            );

            ensure_out_dir(cfg)?;
            let nu_path = out_path(cfg, "nu_field.csv");
            let zeta_path = out_path(cfg, "zeta_field.csv");
            let log_path = out_path(cfg, "log.csv");
            let report_path = out_path(cfg, "report.txt");
            io::write_field_csv(&nu_path, &last.nu).map_err(output_err)?;
            io::write_field_csv(&zeta_path, &last.zeta).map_err(output_err)?;
            io::write_multiplicity_csv(&log_path, &out).map_err(output_err)?;
            let mut r = Report::common(cfg);
            r.push("lambda", lambda.to_string());
            r.push("r", r_exp.to_string());
            r.push_f64("lambda_hat", c.lambda_hat);
            r.push_f64("radius", c.radius);
            r.push_f64("rho", c.rho);
            r.push_f64("endpoint_scale", c.endpoint_scale);
            r.push("levels_run", out.pairs.len().to_string());
            r.push_f64("eps_last", last.epsilon);
            r.push_f64("i_nu", last.i_nu);
            r.push_f64("i_zeta", last.i_zeta);
            r.push_f64("theta_hat", out.theta_hat);
            r.push_f64("theta_last_rel_change", out.theta_last_rel_change);
            r.push_f64("distinctness", out.distinctness);
            r.push_f64("weak_residual_nu", out.weak_residual_nu);
            r.push_f64("weak_residual_zeta", out.weak_residual_zeta);
            r.push_f64("energy_cauchy_nu", out.energy_cauchy_nu);
            r.push_f64("energy_cauchy_zeta", out.energy_cauchy_zeta);
            r.push_f64("seminorm_zeta", last.seminorm_zeta);
            r.push("status", "ok");
            r.write(&report_path)?;
            phase(
                quiet,
                format!(
                    "wrote {}, {}, {}, {}",
                    nu_path.display(),
                    zeta_path.display(),
                    log_path.display(),
                    report_path.display()
                ),
            );
            Ok(())
        }
        Err(e) => Err(classify_multiplicity(e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        let invalid = classify_solve(SolveError::InvalidOptions("bad".into()));
        assert_eq!(invalid.exit_code(), 1, "configuration problems exit 1");

        let broken = classify_singular(SingularError::MonotonicityBroken {
            level: 8,
            violation: 1e-3,
        });
        assert_eq!(broken.exit_code(), 2, "invariant violations exit 2");

        let stalled = classify_multiplicity(MultiplicityError::MountainPassStalled {
            grad_norm: 1.0,
            path: Vec::new(),
        });
        assert_eq!(stalled.exit_code(), 3, "non-convergence exits 3");

        let supercritical = classify_multiplicity(MultiplicityError::Supercritical {
            r_plus_one: 7.0,
            cap: 6.0,
        });
        assert_eq!(supercritical.exit_code(), 1, "growth-cap rejection exits 1");
    }

    #[test]
    fn regime_messages_stay_functional() {
        let err = classify_energy(&EnergyError::UnsupportedRegime { p: 1.8, kind: "t_norm" });
        let msg = err.to_string();
        assert!(
            msg.contains("euclidean norm or the t-norm with t = p"),
            "the regime rule is stated in terms of what to change: {msg}"
        );
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn norm_labels_echo_parameters() {
        assert_eq!(norm_label(NormKind::Euclidean), "euclidean");
        assert_eq!(norm_label(NormKind::TNorm { t: 4.0 }), "t_norm(t = 4)");
        assert_eq!(
            norm_label(NormKind::Quartic { lambda: 1.0, mu: 2.0 }),
            "quartic(lambda = 1, mu = 2)"
        );
    }
}
