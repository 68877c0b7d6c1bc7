//! Strictly convex solves: the Dirichlet problem and the first eigenpair.
//!
//! [`solve_dirichlet`] minimizes the convex functional of
//! [`ConvexEnergy`](crate::energy::ConvexEnergy), which is the discrete
//! zero-boundary problem `-div(H(∇u)^{p-1} ∇H(∇u)) = g`.
//!
//! [`eigenpair`] minimizes the Rayleigh quotient
//! `∫ H(∇v)^p / ∫ |v|^p` over nonzero fields, returning the smallest
//! eigenvalue and its positive, sup-normalized eigenfunction. Both
//! routines certify their output through gradient residuals rather than
//! through properties of the iteration that produced it.

use std::cell::RefCell;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::descent::{lbfgs, DescentOptions, Objective};
use crate::energy::{
    dirichlet_grad, dirichlet_value, validate_regime, ConvexEnergy, Energy, EnergyError,
};
use crate::grid::{Grid, ScalarField};
use crate::norm::FinslerNorm;

/// Max-norm residual below which an eigenpair is accepted.
const EIGEN_RESIDUAL_TOL: f64 = 1e-6;

/// Nodal values this far below zero trip the minimum-principle flag.
const POSITIVITY_SLACK: f64 = 1e-12;

/// Tuning parameters for the convex solves.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Convergence threshold on the max-norm of the energy gradient.
    pub tol_grad: f64,
    /// Iteration cap.
    pub max_iters: usize,
    /// Backtracking shrink factor for the line search.
    pub ls_shrink: f64,
    /// Armijo sufficient-decrease constant.
    pub ls_c1: f64,
    /// Curvature pairs retained by the quasi-second-order update.
    pub memory: usize,
    /// Seed recorded with the run; the descent itself is deterministic,
    /// so this only tags reports and any caller-provided random starts.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_grad: 1e-9,
            max_iters: 10_000,
            ls_shrink: 0.5,
            ls_c1: 1e-4,
            memory: 10,
            seed: 0,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<(), SolveError> {
        if !(self.tol_grad.is_finite() && self.tol_grad > 0.0) {
            return Err(SolveError::InvalidOptions(format!(
                "tol_grad must be positive, got {}",
                self.tol_grad
            )));
        }
        if self.max_iters == 0 {
            return Err(SolveError::InvalidOptions("max_iters must be at least 1".into()));
        }
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return Err(SolveError::InvalidOptions(format!(
                "line-search shrink must lie in (0, 1), got {}",
                self.ls_shrink
            )));
        }
        if !(self.ls_c1 > 0.0 && self.ls_c1 < 0.5) {
            return Err(SolveError::InvalidOptions(format!(
                "sufficient-decrease constant must lie in (0, 0.5), got {}",
                self.ls_c1
            )));
        }
        Ok(())
    }

    fn descent(&self) -> DescentOptions {
        DescentOptions {
            tol_grad: self.tol_grad,
            max_iters: self.max_iters,
            ls_shrink: self.ls_shrink,
            ls_c1: self.ls_c1,
            ls_max: 60,
            memory: self.memory.max(1),
            record_history: true,
        }
    }
}

/// Outcome summary of a convex solve or eigenpair run.
#[derive(Debug, Clone)]
pub struct SolverReport {
    /// Accepted descent iterations.
    pub iterations: usize,
    /// Whether the gradient tolerance was met.
    pub converged: bool,
    /// Final functional value (the eigenvalue for eigenpair runs).
    pub final_energy: f64,
    /// Final gradient max-norm.
    pub final_grad_norm: f64,
    /// Functional value at every accepted iterate; nonincreasing up to
    /// a relative 1e-12 roundoff band (steps at the arithmetic floor
    /// are accepted on gradient contraction rather than value
    /// decrease).
    pub energy_history: Vec<f64>,
    /// Gradient max-norm at every accepted iterate.
    pub grad_history: Vec<f64>,
    /// Max-norm of the returned field.
    pub linf_norm: f64,
    /// Whether the returned field is finite in max-norm.
    pub linf_bound_check: bool,
    /// Smallest nodal value of the returned field.
    pub positivity_min: f64,
    /// Human-readable notes (minimum-principle checks, certifications).
    pub flags: Vec<String>,
}

/// Errors from the convex solves.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(
        "{context}: gradient max-norm {grad_norm:.3e} after {iterations} iterations",
        grad_norm = report.final_grad_norm,
        iterations = report.iterations
    )]
    NonConvergence {
        context: String,
        /// Best iterate at the time of failure.
        field: ScalarField,
        /// Partial run report.
        report: Box<SolverReport>,
    },
}

struct DirichletObjective<'a> {
    energy: &'a ConvexEnergy,
}

impl Objective for DirichletObjective<'_> {
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.energy.grad_into_raw(x, grad);
        self.energy.eval_raw(x)
    }
}

/// Minimize `energy` from `start`, which must vanish on the boundary.
pub(crate) fn solve_convex_energy(
    energy: &ConvexEnergy,
    start: &ScalarField,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolverReport), SolveError> {
    opts.validate()?;
    energy.eval(start)?;
    let grid = energy.grid().clone();
    let res = lbfgs(&DirichletObjective { energy }, start.values().to_vec(), &opts.descent());

    let u = ScalarField::new(grid.clone(), res.x).map_err(EnergyError::from)?;
    let mut flags = vec![format!("seed={}", opts.seed)];
    if res.stalled && !res.converged {
        flags.push("descent stalled before reaching the gradient tolerance".into());
    }

    let g = energy.rhs().values();
    let g_nonneg = g.iter().all(|&v| v >= 0.0);
    let g_nonzero = g.iter().any(|&v| v > 0.0);
    let positivity_min = u.min_value();
    if g_nonneg && g_nonzero {
        if positivity_min < -POSITIVITY_SLACK {
            flags.push(format!(
                "minimum principle violated: min nodal value {positivity_min:.3e}"
            ));
        }
        if grid.interior_nodes().iter().any(|&i| u.values()[i] <= 0.0) {
            flags.push("solution not strictly positive at some interior node".into());
        }
    }

    let linf = u.linf_norm();
    let report = SolverReport {
        iterations: res.iterations,
        converged: res.converged,
        final_energy: res.value,
        final_grad_norm: res.grad_norm,
        energy_history: res.energy_history,
        grad_history: res.grad_history,
        linf_norm: linf,
        linf_bound_check: linf.is_finite(),
        positivity_min,
        flags,
    };

    if !report.converged {
        return Err(SolveError::NonConvergence {
            context: "convex solve did not reach the gradient tolerance".into(),
            field: u,
            report: Box::new(report),
        });
    }
    Ok((u, report))
}

/// Solve the zero-boundary problem `-div(H(∇u)^{p-1} ∇H(∇u)) = g` by
/// minimizing its convex energy from the zero field.
pub fn solve_dirichlet(
    grid: &Arc<Grid>,
    norm: FinslerNorm,
    p: f64,
    g: &ScalarField,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolverReport), SolveError> {
    let start = ScalarField::zeros(grid.clone());
    solve_dirichlet_warm(grid, norm, p, g, &start, opts)
}

/// As [`solve_dirichlet`], starting the descent from `start` (which must
/// vanish on the boundary). Used for warm starts and seeded-start
/// uniqueness checks.
pub fn solve_dirichlet_warm(
    grid: &Arc<Grid>,
    norm: FinslerNorm,
    p: f64,
    g: &ScalarField,
    start: &ScalarField,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolverReport), SolveError> {
    let energy = ConvexEnergy::new(grid.clone(), norm, p, g.clone())?;
    solve_convex_energy(&energy, start, opts)
}

/// A random zero-boundary field with independent interior values drawn
/// uniformly from `[-amplitude, amplitude]`; deterministic in `seed`.
pub fn random_interior_field(grid: &Arc<Grid>, seed: u64, amplitude: f64) -> ScalarField {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut f = ScalarField::zeros(grid.clone());
    for &i in grid.interior_nodes() {
        f.values_mut()[i] = rng.gen_range(-amplitude..amplitude);
    }
    f
}

/// Rayleigh quotient `∫ H(∇v)^p / ∫ |v|^p` with exact-per-interpolant
/// numerator and degree-5 quadrature denominator. Scale-invariant, so
/// the descent can run unnormalized; normalization happens on output.
struct RayleighObjective<'a> {
    grid: &'a Grid,
    norm: FinslerNorm,
    p: f64,
    scratch_s: RefCell<Vec<f64>>,
    scratch_m: RefCell<Vec<f64>>,
}

impl RayleighObjective<'_> {
    /// Numerator `S = ∫ H(∇v)^p`.
    fn numerator(&self, x: &[f64]) -> f64 {
        self.p * dirichlet_value(self.grid, &self.norm, self.p, x)
    }
}

impl Objective for RayleighObjective<'_> {
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut sg = self.scratch_s.borrow_mut();
        let mut mg = self.scratch_m.borrow_mut();
        dirichlet_grad(self.grid, &self.norm, self.p, x, &mut sg);
        let s = self.numerator(x);
        let m = self.grid.abs_pow_value_grad(x, self.p, Some(&mut mg));
        if m <= 0.0 {
            grad.fill(0.0);
            return f64::INFINITY;
        }
        let quotient = s / m;
        for i in 0..x.len() {
            grad[i] = if self.grid.is_boundary(i) {
                0.0
            } else {
                (self.p * sg[i] - quotient * mg[i]) / m
            };
        }
        quotient
    }
}

/// First eigenpair of the anisotropic p-Laplace operator on `grid`:
/// minimizes the Rayleigh quotient from a positive constant interior
/// field and returns `(λ₁, e₁, report)` with `e₁` scaled to max nodal
/// value 1. The pair is certified by the stationarity residual
/// `∇(∫H(∇e)^p) - λ₁ ∇(∫|e|^p)` being at most `1e-6` in max-norm;
/// a run that cannot certify returns a non-convergence error.
pub fn eigenpair(
    grid: &Arc<Grid>,
    norm: FinslerNorm,
    p: f64,
    opts: &SolveOptions,
) -> Result<(f64, ScalarField, SolverReport), SolveError> {
    opts.validate()?;
    if norm.dim() != grid.dim() {
        return Err(SolveError::Energy(EnergyError::Grid(
            crate::grid::GridError::NormDimension {
                norm_dim: norm.dim(),
                grid_dim: grid.dim(),
            },
        )));
    }
    validate_regime(&norm, p)?;

    let n = grid.node_count();
    let objective = RayleighObjective {
        grid,
        norm,
        p,
        scratch_s: RefCell::new(vec![0.0; n]),
        scratch_m: RefCell::new(vec![0.0; n]),
    };

    // Positive initialization keeps the descent in the basin of the
    // positive first eigenfunction.
    let mut x0 = vec![0.0; n];
    for &i in grid.interior_nodes() {
        x0[i] = 1.0;
    }

    let res = lbfgs(&objective, x0, &opts.descent());

    // Orient positively, then scale so the max nodal value is 1.
    let mut v = res.x;
    let interior_sum: f64 = grid.interior_nodes().iter().map(|&i| v[i]).sum();
    if interior_sum < 0.0 {
        for value in v.iter_mut() {
            *value = -*value;
        }
    }
    let vmax = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mut flags = vec![format!("seed={}", opts.seed)];
    let build_report = |flags: Vec<String>, linf: f64, pos_min: f64, converged: bool| SolverReport {
        iterations: res.iterations,
        converged,
        final_energy: res.value,
        final_grad_norm: res.grad_norm,
        energy_history: res.energy_history.clone(),
        grad_history: res.grad_history.clone(),
        linf_norm: linf,
        linf_bound_check: linf.is_finite(),
        positivity_min: pos_min,
        flags,
    };
    if !(vmax > 0.0) {
        let field = ScalarField::new(grid.clone(), v).map_err(EnergyError::from)?;
        flags.push("iterate collapsed to a nonpositive field".into());
        let report = build_report(flags, field.linf_norm(), field.min_value(), false);
        return Err(SolveError::NonConvergence {
            context: "eigenpair descent collapsed".into(),
            field,
            report: Box::new(report),
        });
    }
    for value in v.iter_mut() {
        *value /= vmax;
    }

    // Certify stationarity of the normalized pair.
    let mut sg = vec![0.0; n];
    let mut mg = vec![0.0; n];
    dirichlet_grad(grid, &norm, p, &v, &mut sg);
    let m = grid.abs_pow_value_grad(&v, p, Some(&mut mg));
    let s = objective.numerator(&v);
    let lambda1 = s / m;
    let mut residual_sup = 0.0f64;
    for &i in grid.interior_nodes() {
        residual_sup = residual_sup.max((p * sg[i] - lambda1 * mg[i]).abs());
    }
    flags.push(format!("eigen_residual_sup={residual_sup:.3e}"));

    let e1 = ScalarField::new(grid.clone(), v).map_err(EnergyError::from)?;
    let pos_min = grid
        .interior_nodes()
        .iter()
        .map(|&i| e1.values()[i])
        .fold(f64::INFINITY, f64::min);
    if pos_min <= 0.0 {
        flags.push("eigenfunction not strictly positive at some interior node".into());
    }

    let certified = residual_sup <= EIGEN_RESIDUAL_TOL;
    if !res.converged && certified {
        flags.push("accepted by residual certification after hitting the iteration cap".into());
    }
    let report = build_report(flags, e1.linf_norm(), pos_min, res.converged || certified);

    if !certified {
        return Err(SolveError::NonConvergence {
            context: format!(
                "eigenpair residual {residual_sup:.3e} above the certification threshold \
                 {EIGEN_RESIDUAL_TOL:.0e}"
            ),
            field: e1,
            report: Box::new(report),
        });
    }
    Ok((lambda1, e1, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn torsion_res2_hits_closed_form_minimizer() {
        let grid = Grid::segment((0.0, 1.0), 2).unwrap();
        let norm = FinslerNorm::euclidean(1).unwrap();
        let g = ScalarField::constant(grid.clone(), 1.0).unwrap();
        let (u, report) =
            solve_dirichlet(&grid, norm, 2.0, &g, &SolveOptions::default()).unwrap();
        assert!(
            (u.values()[1] - 0.125).abs() < 1e-9,
            "interior value {} vs 1/8",
            u.values()[1]
        );
        assert!(report.converged);
        assert!(report.positivity_min >= -1e-12);
    }

    #[test]
    fn torsion_p3_matches_exact_profile_at_center() {
        let grid = Grid::segment((0.0, 1.0), 128).unwrap();
        let norm = FinslerNorm::euclidean(1).unwrap();
        let g = ScalarField::constant(grid.clone(), 1.0).unwrap();
        let (u, _) = solve_dirichlet(&grid, norm, 3.0, &g, &SolveOptions::default()).unwrap();
        let center = u.values()[64];
        let exact = (2.0 / 3.0) * 0.5f64.powf(1.5);
        assert!(
            (center - exact).abs() <= 2e-3,
            "center value {center} vs exact {exact}"
        );
    }

    #[test]
    fn manufactured_laplace_2d_converges() {
        let grid = Grid::rectangle((0.0, 1.0), (0.0, 1.0), (16, 16)).unwrap();
        let norm = FinslerNorm::euclidean(2).unwrap();
        let g = ScalarField::from_fn(grid.clone(), |c| {
            2.0 * PI * PI * (PI * c[0]).sin() * (PI * c[1]).sin()
        })
        .unwrap();
        let (u, report) =
            solve_dirichlet(&grid, norm, 2.0, &g, &SolveOptions::default()).unwrap();
        let exact = ScalarField::from_fn(grid.clone(), |c| (PI * c[0]).sin() * (PI * c[1]).sin())
            .unwrap();
        let err = u.linf_diff(&exact).unwrap();
        assert!(err <= 0.01, "manufactured-solution error {err} at res 16");
        for pair in report.energy_history.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-12 * (1.0 + pair[0].abs()),
                "energy history must be nonincreasing up to roundoff"
            );
        }
    }

    #[test]
    fn zero_load_returns_zero_immediately() {
        let grid = Grid::segment((0.0, 1.0), 8).unwrap();
        let norm = FinslerNorm::euclidean(1).unwrap();
        let g = ScalarField::zeros(grid.clone());
        let (u, report) =
            solve_dirichlet(&grid, norm, 2.0, &g, &SolveOptions::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert_eq!(u.linf_norm(), 0.0);
    }

    #[test]
    fn warm_start_at_solution_is_stationary() {
        let grid = Grid::segment((0.0, 1.0), 16).unwrap();
        let norm = FinslerNorm::euclidean(1).unwrap();
        let g = ScalarField::constant(grid.clone(), 1.0).unwrap();
        let opts = SolveOptions::default();
        let (u, _) = solve_dirichlet(&grid, norm, 2.0, &g, &opts).unwrap();
        let (_, report) = solve_dirichlet_warm(&grid, norm, 2.0, &g, &u, &opts).unwrap();
        assert_eq!(report.iterations, 0, "warm start at the minimizer needs no work");
    }

    #[test]
    fn iteration_cap_error_carries_partial_report() {
        let grid = Grid::segment((0.0, 1.0), 16).unwrap();
        let norm = FinslerNorm::euclidean(1).unwrap();
        let g = ScalarField::constant(grid.clone(), 1.0).unwrap();
        let opts = SolveOptions { max_iters: 1, ..SolveOptions::default() };
        match solve_dirichlet(&grid, norm, 2.0, &g, &opts) {
            Err(SolveError::NonConvergence { report, .. }) => {
                assert_eq!(report.iterations, 1);
                assert!(!report.converged);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_options_are_rejected() {
        let grid = Grid::segment((0.0, 1.0), 4).unwrap();
        let norm = FinslerNorm::euclidean(1).unwrap();
        let g = ScalarField::constant(grid.clone(), 1.0).unwrap();
        let opts = SolveOptions { tol_grad: 0.0, ..SolveOptions::default() };
        assert!(matches!(
            solve_dirichlet(&grid, norm, 2.0, &g, &opts),
            Err(SolveError::InvalidOptions(_))
        ));
    }

    #[test]
    fn regime_violation_surfaces_as_energy_error() {
        let grid = Grid::rectangle((0.0, 1.0), (0.0, 1.0), (4, 4)).unwrap();
        let norm = FinslerNorm::t_norm(2, 4.0).unwrap();
        let g = ScalarField::constant(grid.clone(), 1.0).unwrap();
        assert!(matches!(
            solve_dirichlet(&grid, norm, 1.5, &g, &SolveOptions::default()),
            Err(SolveError::Energy(EnergyError::UnsupportedRegime { .. }))
        ));
    }

    #[test]
    fn mass_term_gradient_matches_finite_differences() {
        let grid = Grid::rectangle((0.0, 1.0), (0.0, 1.0), (3, 3)).unwrap();
        let p = 2.5;
        let v = random_interior_field(&grid, 11, 1.0);
        let mut grad = vec![0.0; grid.node_count()];
        grid.abs_pow_value_grad(v.values(), p, Some(&mut grad));
        let step = 1e-6;
        for &i in grid.interior_nodes() {
            let mut plus = v.values().to_vec();
            let mut minus = v.values().to_vec();
            plus[i] += step;
            minus[i] -= step;
            let fd = (grid.abs_pow_value_grad(&plus, p, None)
                - grid.abs_pow_value_grad(&minus, p, None))
                / (2.0 * step);
            assert!(
                (fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "mass gradient at node {i}: analytic {} vs fd {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn eigenpair_1d_matches_classical_value_from_above() {
        let grid = Grid::segment((0.0, 1.0), 32).unwrap();
        let norm = FinslerNorm::euclidean(1).unwrap();
        let (lambda, e, report) =
            eigenpair(&grid, norm, 2.0, &SolveOptions::default()).unwrap();
        let classical = PI * PI;
        assert!(
            lambda >= classical,
            "conforming discretization overshoots: {lambda} vs {classical}"
        );
        assert!(
            (lambda - classical) / classical < 0.01,
            "eigenvalue {lambda} within 1% of {classical}"
        );
        let exact = ScalarField::from_fn(grid.clone(), |c| (PI * c[0]).sin()).unwrap();
        assert!(e.linf_diff(&exact).unwrap() <= 1e-2, "eigenfunction close to the sine");
        assert!((e.max_value() - 1.0).abs() < 1e-14, "sup-normalized to 1");
        assert!(report.positivity_min > 0.0, "interior-positive eigenfunction");
    }

    #[test]
    fn eigenvalue_scales_inversely_with_dilation() {
        let norm = FinslerNorm::euclidean(1).unwrap();
        let p = 2.0;
        let unit = Grid::segment((0.0, 1.0), 32).unwrap();
        let doubled = Grid::segment((0.0, 2.0), 32).unwrap();
        let (l1, _, _) = eigenpair(&unit, norm, p, &SolveOptions::default()).unwrap();
        let (l2, _, _) = eigenpair(&doubled, norm, p, &SolveOptions::default()).unwrap();
        let ratio = l2 / l1;
        let expect = 2.0f64.powf(-p);
        assert!(
            (ratio - expect).abs() < 1e-8,
            "dilation by 2 divides the eigenvalue by 2^p: ratio {ratio} vs {expect}"
        );
    }
}
