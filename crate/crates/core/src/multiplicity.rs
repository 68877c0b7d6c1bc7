//! Two-solution pipeline for the perturbed singular problem
//! `-div(H(∇u)^{p-1} ∇H(∇u)) = λ u^{-q(x)} + u^r` with zero boundary
//! data, subcritical superlinear `r` and coupling `λ` below an estimated
//! threshold.
//!
//! The pipeline estimates the energy-landscape geometry (a ball of
//! radius `R` whose rim carries energy at least `ρ`, with a negative
//! well inside and a distant endpoint below `-1`), finds a local
//! minimizer inside the ball and a mountain-pass point beyond the rim
//! for each regularization level `ε`, and drives `ε → 0` along a
//! geometric schedule with warm starts. The two limit fields are
//! certified by gradient residuals, a common positive barrier from
//! below, an energy ordering, and a final distinctness gap.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::convex::{eigenpair, solve_dirichlet, SolveError, SolveOptions, SolverReport};
use crate::descent::{lbfgs, DescentOptions, Objective};
use crate::energy::{
    dirichlet_grad, dirichlet_value, validate_regime, EnergyError, PerturbedEnergy,
};
use crate::grid::{Grid, GridError, ScalarField};
use crate::norm::FinslerNorm;

/// Gradient max-norm certifying a mountain-pass point.
const MP_GRAD_TOL: f64 = 1e-5;

/// Gradient max-norm below which the saddle refinement switches from
/// squared-gradient descent to inexact Newton steps.
const NEWTON_ACTIVATION: f64 = 5e-2;

/// Conjugate-gradient iteration cap inside each inexact Newton step.
const NEWTON_CG_CAP: usize = 200;

/// Gradient max-norm certifying the local minimizer when the ball
/// constraint is inactive.
const LOCAL_RESIDUAL_TOL: f64 = 1e-6;

/// Slack for the energy-ordering and barrier comparisons.
const ORDERING_SLACK: f64 = 1e-8;

/// Nodal negatives up to this magnitude are cleaned to zero after each
/// descent phase; anything larger is left to surface as a violation.
const SIGN_CLEANUP: f64 = 1e-12;

/// Distinctness must exceed this multiple of the mountain-pass gradient
/// tolerance.
const DISTINCTNESS_FACTOR: f64 = 10.0;

/// Errors from the two-solution pipeline.
#[derive(Debug, Error)]
pub enum MultiplicityError {
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "supercritical for this regime: r + 1 = {r_plus_one} reaches the growth cap {cap}"
    )]
    Supercritical { r_plus_one: f64, cap: f64 },
    #[error(
        "negative well not found inside the constraint ball; the coupling lambda = {lambda} \
         may exceed the estimated threshold"
    )]
    NegativeWellNotFound { lambda: f64 },
    #[error(
        "local minimizer stationarity residual {residual:.3e} above {LOCAL_RESIDUAL_TOL:.0e} \
         with the ball constraint inactive"
    )]
    StationarityNotCertified { residual: f64 },
    #[error(
        "mountain-pass deformation stalled at gradient max-norm {grad_norm:.3e} \
         (tolerance {MP_GRAD_TOL:.0e}); the path snapshot is attached"
    )]
    MountainPassStalled {
        grad_norm: f64,
        /// Knots of the deformation path at the time of the stall.
        path: Vec<ScalarField>,
    },
    #[error(
        "two-solution structure lost at eps = {epsilon:.1e}: {detail}; \
         lambda = {lambda} may be at or beyond the estimated threshold {lambda_hat:.4}"
    )]
    GeometryFailure {
        epsilon: f64,
        lambda: f64,
        lambda_hat: f64,
        detail: String,
    },
    #[error(
        "a critical field dropped {worst:.3e} below the barrier at eps = {epsilon:.1e}; \
         the discrete minimum principle failed"
    )]
    BarrierViolated { epsilon: f64, worst: f64 },
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
}

/// The perturbed problem data, validated on construction.
#[derive(Debug, Clone)]
pub struct PerturbedProblem {
    grid: Arc<Grid>,
    norm: FinslerNorm,
    p: f64,
    q: ScalarField,
    r: f64,
    lambda: f64,
}

impl PerturbedProblem {
    /// Validate and build. Requires `p` below the grid dimension (so the
    /// subcritical growth cap `p N/(N-p)` exists), `p - 1 < r` with
    /// `r + 1` below that cap, `λ > 0`, `q` nodally in `(0, 1)`, and a
    /// norm/exponent pair in the supported regime.
    pub fn new(
        grid: Arc<Grid>,
        norm: FinslerNorm,
        p: f64,
        q: ScalarField,
        r: f64,
        lambda: f64,
    ) -> Result<Self, MultiplicityError> {
        if norm.dim() != grid.dim() {
            return Err(MultiplicityError::Energy(EnergyError::Grid(
                GridError::NormDimension { norm_dim: norm.dim(), grid_dim: grid.dim() },
            )));
        }
        validate_regime(&norm, p).map_err(MultiplicityError::Energy)?;
        let n = grid.dim() as f64;
        if !(p < n) {
            return Err(MultiplicityError::InvalidParameter(format!(
                "the two-solution pipeline requires p below the grid dimension, got p = {p} \
                 in dimension {}",
                grid.dim()
            )));
        }
        let cap = n * p / (n - p);
        if !(r > p - 1.0) {
            return Err(MultiplicityError::InvalidParameter(format!(
                "r must exceed p - 1 = {}, got {r}",
                p - 1.0
            )));
        }
        if r + 1.0 >= cap {
            return Err(MultiplicityError::Supercritical { r_plus_one: r + 1.0, cap });
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(MultiplicityError::InvalidParameter(format!(
                "lambda must be finite and positive, got {lambda}"
            )));
        }
        if !grid.same_mesh(q.grid()) {
            return Err(MultiplicityError::Energy(EnergyError::Grid(GridError::GridMismatch)));
        }
        for &qi in q.values() {
            if !(qi > 0.0 && qi < 1.0) {
                return Err(MultiplicityError::InvalidParameter(format!(
                    "the singular exponent must lie strictly between 0 and 1, got {qi}"
                )));
            }
        }
        Ok(Self { grid, norm, p, q, r, lambda })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn norm(&self) -> &FinslerNorm {
        &self.norm
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> &ScalarField {
        &self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The subcritical growth cap `p N/(N-p)`.
    pub fn growth_cap(&self) -> f64 {
        let n = self.grid.dim() as f64;
        n * self.p / (n - self.p)
    }

    /// The regularized functional at level `epsilon`.
    pub fn energy(&self, epsilon: f64) -> Result<PerturbedEnergy, MultiplicityError> {
        self.energy_with_lambda(self.lambda, epsilon)
    }

    /// The regularized functional with an overridden coupling (used for
    /// the `λ = 0` geometry evaluations).
    pub fn energy_with_lambda(
        &self,
        lambda: f64,
        epsilon: f64,
    ) -> Result<PerturbedEnergy, MultiplicityError> {
        PerturbedEnergy::new(
            self.grid.clone(),
            self.norm,
            self.p,
            lambda,
            epsilon,
            self.q.clone(),
            self.r,
        )
        .map_err(MultiplicityError::Energy)
    }

    /// Grid seminorm of raw nodal values.
    fn seminorm_raw(&self, vals: &[f64]) -> f64 {
        (self.p * dirichlet_value(&self.grid, &self.norm, self.p, vals)).powf(1.0 / self.p)
    }
}

/// Mountain-pass geometry estimates; see [`mp_constants`].
#[derive(Debug, Clone)]
pub struct GeometryConstants {
    /// Ball radius `R` in the grid seminorm.
    pub radius: f64,
    /// Rim lower bound `ρ > 0` for the unforced functional on the
    /// sphere of radius `R`.
    pub rho: f64,
    /// Estimated coupling threshold: `ρ` divided by the largest probe
    /// value of the singular integral at scale `R`.
    pub lambda_hat: f64,
    /// Endpoint scale `T > R` with unforced energy below `-1` at
    /// `T e₁`.
    pub endpoint_scale: f64,
    /// Largest probe ratio of the `L^{r+1}` norm to the grid seminorm.
    pub sobolev_c_hat: f64,
    /// Volume factor from the exponent bookkeeping.
    pub l: f64,
    /// Safety shrink factor in `(0, 1)` used for `R`.
    pub k: f64,
}

fn lumped_singular_integral(grid: &Grid, q: &ScalarField, vals: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..grid.node_count() {
        let up = vals[i].max(0.0);
        if up > 0.0 {
            let onemq = 1.0 - q.values()[i];
            acc += grid.lump(i) * up.powf(onemq) / onemq;
        }
    }
    acc
}

fn max_probe_ratio(prob: &PerturbedProblem, probes: &[ScalarField]) -> f64 {
    let r1 = prob.r + 1.0;
    let mut best = 0.0f64;
    for v in probes {
        let semi = prob.seminorm_raw(v.values());
        if semi <= 0.0 {
            continue;
        }
        let lr = prob
            .grid
            .integrate_abs_pow(v, r1)
            .expect("probe lives on the problem grid")
            .powf(1.0 / r1);
        best = best.max(lr / semi);
    }
    best
}

fn max_singular_probe_integral(
    prob: &PerturbedProblem,
    probes: &[ScalarField],
    scale: f64,
) -> f64 {
    let mut best = 0.0f64;
    let mut buf = vec![0.0; prob.grid.node_count()];
    for v in probes {
        let semi = prob.seminorm_raw(v.values());
        if semi <= 0.0 {
            continue;
        }
        let factor = scale / semi;
        for (b, &x) in buf.iter_mut().zip(v.values()) {
            *b = factor * x;
        }
        best = best.max(lumped_singular_integral(&prob.grid, &prob.q, &buf));
    }
    best
}

/// A smooth compactly supported bump with random center and width,
/// forced to zero on the boundary.
fn random_bump(grid: &Arc<Grid>, rng: &mut StdRng) -> ScalarField {
    let extents = grid.extents().to_vec();
    let min_side = extents.iter().map(|&(a, b)| b - a).fold(f64::INFINITY, f64::min);
    for _ in 0..20 {
        let center: Vec<f64> = extents
            .iter()
            .map(|&(a, b)| a + (b - a) * rng.gen_range(0.25..0.75))
            .collect();
        let width = min_side * rng.gen_range(0.15..0.35);
        let mut f = ScalarField::from_fn(grid.clone(), |c| {
            let d2: f64 = c
                .iter()
                .zip(&center)
                .map(|(x, m)| (x - m) * (x - m))
                .sum();
            let s = 1.0 - d2 / (width * width);
            if s > 0.0 { s * s } else { 0.0 }
        })
        .expect("bump values are finite");
        f.zero_boundary();
        if f.linf_norm() > 0.0 {
            return f;
        }
    }
    // Fallback for very coarse grids: the first separable sine mode.
    sine_mode(grid, 1, 1)
}

fn sine_mode(grid: &Arc<Grid>, i: usize, j: usize) -> ScalarField {
    use std::f64::consts::PI;
    let extents = grid.extents().to_vec();
    let mut f = ScalarField::from_fn(grid.clone(), |c| {
        let sx = ((c[0] - extents[0].0) / (extents[0].1 - extents[0].0) * PI * i as f64).sin();
        let sy = if extents.len() > 1 {
            ((c[1] - extents[1].0) / (extents[1].1 - extents[1].0) * PI * j as f64).sin()
        } else {
            1.0
        };
        sx * sy
    })
    .expect("sine values are finite");
    f.zero_boundary();
    f
}

/// The first eigenfunction, salvaged from the residual-certification
/// error when the degenerate-exponent tail convergence is slow (the
/// geometry only needs a positive direction, not a certified pair).
fn eigen_direction(
    grid: &Arc<Grid>,
    norm: FinslerNorm,
    p: f64,
    opts: &SolveOptions,
) -> Result<(ScalarField, Vec<String>), MultiplicityError> {
    match eigenpair(grid, norm, p, opts) {
        Ok((_, e1, _)) => Ok((e1, Vec::new())),
        Err(SolveError::NonConvergence { field, report, .. }) => {
            let mut flags = vec![format!(
                "eigen direction used without residual certification (residual flagged in: \
                 {:?})",
                report.flags
            )];
            flags.push("endpoint direction taken from the uncertified iterate".into());
            Ok((field, flags))
        }
        Err(other) => Err(MultiplicityError::Solve(other)),
    }
}

/// Estimate the mountain-pass geometry constants by probing.
///
/// `Ĉ` is the largest probe ratio `‖v‖_{L^{r+1}} / ‖v‖_X` over the
/// eigenfunction, separable sine modes, and seeded random bumps;
/// `l` comes from the box volume and the exponent bookkeeping;
/// `R = k ((r+1)/(p Ĉ l))^{1/(r+1-p)}`;
/// `ρ = (R^p/p - Ĉ l R^{r+1}/(r+1)) / 2`;
/// `Λ̂ = ρ / max_probes ∫ (v⁺)^{1-q}/(1-q)` at probe scale `R` (the
/// unregularized integral dominates every `ε > 0` version, so the
/// estimate is valid along the whole continuation);
/// `T` doubles from `2R` until the unforced energy at `T e₁` is below
/// `-1`.
pub fn mp_constants(
    prob: &PerturbedProblem,
    epsilon: f64,
    k: f64,
    probe_count: usize,
    seed: u64,
) -> Result<GeometryConstants, MultiplicityError> {
    if !(k > 0.0 && k < 1.0) {
        return Err(MultiplicityError::InvalidParameter(format!(
            "the shrink factor k must lie in (0, 1), got {k}"
        )));
    }
    if probe_count < 8 {
        return Err(MultiplicityError::InvalidParameter(format!(
            "at least 8 probe fields are required, got {probe_count}"
        )));
    }
    let grid = &prob.grid;
    let mut probes = Vec::with_capacity(probe_count);
    let eigen_opts = SolveOptions { max_iters: 4000, ..SolveOptions::default() };
    let (e1, _) = eigen_direction(grid, prob.norm, prob.p, &eigen_opts)?;
    probes.push(e1);
    for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        probes.push(sine_mode(grid, i, j));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    while probes.len() < probe_count {
        probes.push(random_bump(grid, &mut rng));
    }

    let c_hat = max_probe_ratio(prob, &probes);
    if !(c_hat > 0.0) {
        return Err(MultiplicityError::InvariantViolated(
            "all probe fields degenerated to zero".into(),
        ));
    }
    let n = grid.dim() as f64;
    let p = prob.p;
    let r1 = prob.r + 1.0;
    let p_star = n * p / (n - p);
    let s = p_star / r1;
    let s_conj = s / (s - 1.0);
    let l = grid.total_volume().powf(1.0 / s_conj);

    let cap_radius = (r1 / (p * c_hat * l)).powf(1.0 / (r1 - p));
    let radius = k * cap_radius;
    let rho = 0.5 * (radius.powf(p) / p - c_hat * l * radius.powf(r1) / r1);
    if !(rho > 0.0) {
        return Err(MultiplicityError::InvariantViolated(format!(
            "rim value must be positive, got {rho}"
        )));
    }

    let denom = max_singular_probe_integral(prob, &probes, radius);
    if !(denom > 0.0) {
        return Err(MultiplicityError::InvariantViolated(
            "singular probe integral degenerated to zero".into(),
        ));
    }
    let lambda_hat = rho / denom;

    // Endpoint scale: double from 2R until the unforced energy drops
    // below -1 along the eigenfunction ray.
    let unforced = prob.energy_with_lambda(0.0, epsilon)?;
    let e1 = &probes[0];
    let mut t = 2.0 * radius;
    let mut scaled = ScalarField::zeros(grid.clone());
    for _ in 0..200 {
        for (o, &v) in scaled.values_mut().iter_mut().zip(e1.values()) {
            *o = t * v;
        }
        if unforced.eval_raw(scaled.values()) < -1.0 {
            break;
        }
        t *= 2.0;
    }
    for (o, &v) in scaled.values_mut().iter_mut().zip(e1.values()) {
        *o = t * v;
    }
    if !(unforced.eval_raw(scaled.values()) < -1.0) {
        return Err(MultiplicityError::InvariantViolated(
            "no endpoint scale with unforced energy below -1 was found".into(),
        ));
    }

    Ok(GeometryConstants {
        radius,
        rho,
        lambda_hat,
        endpoint_scale: t,
        sobolev_c_hat: c_hat,
        l,
        k,
    })
}

/// Objective wrapper restricting the search to the seminorm ball of
/// radius `radius` by rejecting exterior trial points.
struct BallConstrained<'a> {
    prob: &'a PerturbedProblem,
    energy: &'a PerturbedEnergy,
    radius: f64,
}

impl Objective for BallConstrained<'_> {
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        if self.prob.seminorm_raw(x) > self.radius * (1.0 + 1e-12) {
            grad.fill(0.0);
            return f64::INFINITY;
        }
        self.energy.grad_into_raw(x, grad);
        self.energy.eval_raw(x)
    }
}

fn clamp_tiny_negatives(field: &mut ScalarField) {
    for v in field.values_mut() {
        if *v < 0.0 && *v >= -SIGN_CLEANUP {
            *v = 0.0;
        }
    }
}

/// Find the local minimizer inside the seminorm ball of radius
/// `radius`: locate a negative-energy point along a fixed positive
/// direction, then descend without ever leaving the ball. Returns the
/// cleaned field and a report whose flags state whether the constraint
/// ended active.
pub fn local_minimizer(
    prob: &PerturbedProblem,
    epsilon: f64,
    radius: f64,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolverReport), MultiplicityError> {
    let direction = sine_mode(&prob.grid, 1, 1);
    let s = prob.seminorm_raw(direction.values());
    let energy = prob.energy(epsilon)?;
    let mut start = None;
    let mut scaled = vec![0.0; prob.grid.node_count()];
    for j in 1..=60 {
        let t = radius / s * 0.5f64.powi(j);
        for (o, &v) in scaled.iter_mut().zip(direction.values()) {
            *o = t * v;
        }
        if energy.eval_raw(&scaled) < 0.0 {
            start = Some(scaled.clone());
            break;
        }
    }
    let start = start.ok_or(MultiplicityError::NegativeWellNotFound { lambda: prob.lambda })?;
    local_minimizer_from(prob, &energy, radius, &start, opts)
}

/// As [`local_minimizer`], descending from a caller-provided start
/// (used for warm starts along the continuation).
pub fn local_minimizer_warm(
    prob: &PerturbedProblem,
    epsilon: f64,
    radius: f64,
    start: &ScalarField,
    opts: &SolveOptions,
) -> Result<(ScalarField, SolverReport), MultiplicityError> {
    let energy = prob.energy(epsilon)?;
    if !prob.grid.same_mesh(start.grid()) {
        return Err(MultiplicityError::Energy(EnergyError::Grid(GridError::GridMismatch)));
    }
    local_minimizer_from(prob, &energy, radius, start.values(), opts)
}

fn local_minimizer_from(
    prob: &PerturbedProblem,
    energy: &PerturbedEnergy,
    radius: f64,
    start: &[f64],
    opts: &SolveOptions,
) -> Result<(ScalarField, SolverReport), MultiplicityError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(MultiplicityError::InvalidParameter(format!(
            "the ball radius must be positive, got {radius}"
        )));
    }
    let objective = BallConstrained { prob, energy, radius };
    let engine = DescentOptions {
        tol_grad: opts.tol_grad.min(LOCAL_RESIDUAL_TOL / 10.0),
        max_iters: opts.max_iters,
        ls_shrink: opts.ls_shrink,
        ls_c1: opts.ls_c1,
        ls_max: 60,
        memory: opts.memory.max(1),
        record_history: true,
    };
    let res = lbfgs(&objective, start.to_vec(), &engine);

    let mut nu = ScalarField::new(prob.grid.clone(), res.x).map_err(EnergyError::from)?;
    clamp_tiny_negatives(&mut nu);
    let value = energy.eval_raw(nu.values());
    let seminorm = prob.seminorm_raw(nu.values());
    let active = seminorm >= radius * (1.0 - 1e-8);

    let mut grad = vec![0.0; prob.grid.node_count()];
    energy.grad_into_raw(nu.values(), &mut grad);
    let residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));

    if !(value < 0.0) {
        return Err(MultiplicityError::NegativeWellNotFound { lambda: prob.lambda });
    }
    if !active && residual > LOCAL_RESIDUAL_TOL {
        return Err(MultiplicityError::StationarityNotCertified { residual });
    }

    let mut flags = vec![
        format!("constraint_active={active}"),
        format!("seminorm={seminorm:.6e}"),
        format!("stationarity_residual={residual:.3e}"),
    ];
    if res.stalled && !res.converged {
        flags.push("descent stalled at the arithmetic floor".into());
    }
    let report = SolverReport {
        iterations: res.iterations,
        converged: residual <= LOCAL_RESIDUAL_TOL || active,
        final_energy: value,
        final_grad_norm: residual,
        energy_history: res.energy_history,
        grad_history: res.grad_history,
        linf_norm: nu.linf_norm(),
        linf_bound_check: nu.linf_norm().is_finite(),
        positivity_min: nu.min_value(),
        flags,
    };
    Ok((nu, report))
}

/// Knobs for the mountain-pass search.
#[derive(Debug, Clone)]
pub struct MpPathOptions {
    /// Number of path segments (knots minus one).
    pub segments: usize,
    /// Cap on deformation sweeps.
    pub max_deform_iters: usize,
    /// Initial trial step for each max-knot descent move.
    pub descent_step: f64,
    /// Optional rim floor; a final value below `rho_floor - 1e-8` is
    /// flagged (not an error) for the caller to act on.
    pub rho_floor: Option<f64>,
    /// Cap on saddle-refinement rounds (each a short quasi-Newton
    /// run on the squared gradient norm).
    pub refine_rounds: usize,
}

impl Default for MpPathOptions {
    fn default() -> Self {
        Self {
            segments: 21,
            max_deform_iters: 2000,
            descent_step: 0.5,
            rho_floor: None,
            refine_rounds: 400,
        }
    }
}

/// Squared-gradient-norm objective whose minimizers are critical points;
/// its gradient is a Hessian-vector product computed by central
/// differences of the analytic gradient.
struct SquaredGradient<'a> {
    energy: &'a PerturbedEnergy,
}

impl SquaredGradient<'_> {
    fn grad_of_energy(&self, x: &[f64], out: &mut [f64]) {
        self.energy.grad_into_raw(x, out);
    }
}

impl Objective for SquaredGradient<'_> {
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = x.len();
        let mut g = vec![0.0; n];
        self.grad_of_energy(x, &mut g);
        let phi = 0.5 * g.iter().map(|v| v * v).sum::<f64>();
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            grad.fill(0.0);
            return phi;
        }
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1.5e-8 * (1.0 + xnorm) / gnorm;
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        for i in 0..n {
            plus[i] += h * g[i];
            minus[i] -= h * g[i];
        }
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        self.grad_of_energy(&plus, &mut gp);
        self.grad_of_energy(&minus, &mut gm);
        for i in 0..n {
            grad[i] = (gp[i] - gm[i]) / (2.0 * h);
        }
        phi
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central-difference Hessian-vector product of the energy at `x`
/// along `p`, using the analytic gradient.
fn hessian_vec(energy: &PerturbedEnergy, x: &[f64], p: &[f64], out: &mut [f64]) {
    let pnorm = l2_norm(p);
    if pnorm == 0.0 {
        out.fill(0.0);
        return;
    }
    let xnorm = l2_norm(x);
    let h = 1.5e-8 * (1.0 + xnorm) / pnorm;
    let n = x.len();
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    for i in 0..n {
        plus[i] += h * p[i];
        minus[i] -= h * p[i];
    }
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    energy.grad_into_raw(&plus, &mut gp);
    energy.grad_into_raw(&minus, &mut gm);
    for i in 0..n {
        out[i] = (gp[i] - gm[i]) / (2.0 * h);
    }
}

/// Inexact Newton step for the stationarity system `∇I(x) = 0`:
/// approximately solves `H δ = -g` through conjugate gradients on the
/// normal equations `H² δ = -H g` (positive semidefinite for the
/// symmetric Hessian, so plain CG applies at a saddle), then
/// backtracks on the euclidean gradient norm. Returns the accepted
/// step, or `None` when no step along the computed direction reduces
/// the gradient.
fn newton_step(
    energy: &PerturbedEnergy,
    x: &[f64],
    g: &[f64],
    cg_cap: usize,
) -> Option<Vec<f64>> {
    let n = x.len();
    let mut b = vec![0.0; n];
    hessian_vec(energy, x, g, &mut b);
    for v in b.iter_mut() {
        *v = -*v;
    }
    let b_norm = l2_norm(&b);
    if b_norm == 0.0 {
        return None;
    }

    let mut delta = vec![0.0; n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let mut hp = vec![0.0; n];
    let mut ap = vec![0.0; n];
    for _ in 0..cg_cap {
        hessian_vec(energy, x, &p, &mut hp);
        hessian_vec(energy, x, &hp, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, c)| a * c).sum();
        let pp: f64 = p.iter().map(|v| v * v).sum();
        if pap <= 1e-30 * pp {
            break;
        }
        let alpha = rs / pap;
        for i in 0..n {
            delta[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        if rs_new.sqrt() <= 0.1 * b_norm {
            break;
        }
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    if l2_norm(&delta) == 0.0 {
        return None;
    }

    let g2 = l2_norm(g);
    let mut alpha = 1.0f64;
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    for _ in 0..12 {
        for i in 0..n {
            trial[i] = x[i] + alpha * delta[i];
        }
        energy.grad_into_raw(&trial, &mut g_new);
        if l2_norm(&g_new) < g2 * (1.0 - 1e-4 * alpha) {
            return Some(trial);
        }
        alpha *= 0.5;
    }
    None
}

/// Refine a near-critical point by descending the squared gradient
/// norm in short rounds until the energy gradient meets `MP_GRAD_TOL`.
/// Returns the refined values and per-round `(energy, grad_sup)`
/// history, or `None` on stall.
fn saddle_refine(
    energy: &PerturbedEnergy,
    start: Vec<f64>,
    refine_rounds: usize,
    history: &mut Vec<(f64, f64)>,
) -> Option<Vec<f64>> {
    let objective = SquaredGradient { energy };
    let mut x = start;
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut last_phi = f64::INFINITY;
    for _ in 0..refine_rounds {
        energy.grad_into_raw(&x, &mut g);
        let gsup = sup_norm(&g);
        history.push((energy.eval_raw(&x), gsup));
        if gsup <= MP_GRAD_TOL {
            return Some(x);
        }

        // Near the saddle, inexact Newton steps on the stationarity
        // system converge quadratically where the squared-gradient
        // descent is limited to a conditioning-bound linear rate.
        if gsup <= NEWTON_ACTIVATION {
            if let Some(next) = newton_step(energy, &x, &g, NEWTON_CG_CAP) {
                x = next;
                continue;
            }
        }

        let engine = DescentOptions {
            tol_grad: 0.0,
            max_iters: 30,
            ls_shrink: 0.5,
            ls_c1: 1e-4,
            ls_max: 60,
            memory: 10,
            record_history: false,
        };
        let res = lbfgs(&objective, x, &engine);
        x = res.x;
        let phi = res.value;
        if phi >= last_phi * (1.0 - 1e-14) && res.iterations == 0 {
            // No further decrease is possible.
            energy.grad_into_raw(&x, &mut g);
            let gsup = sup_norm(&g);
            history.push((energy.eval_raw(&x), gsup));
            return (gsup <= MP_GRAD_TOL).then_some(x);
        }
        last_phi = phi;
    }
    energy.grad_into_raw(&x, &mut g);
    let gsup = sup_norm(&g);
    history.push((energy.eval_raw(&x), gsup));
    (gsup <= MP_GRAD_TOL).then_some(x)
}

/// Redistribute path knots evenly by Euclidean arclength of the nodal
/// polyline; endpoints stay fixed.
fn reparameterize(path: &mut Vec<Vec<f64>>) {
    let m = path.len() - 1;
    let mut cum = vec![0.0f64; m + 1];
    for j in 0..m {
        let d: f64 = path[j]
            .iter()
            .zip(&path[j + 1])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        cum[j + 1] = cum[j] + d;
    }
    let total = cum[m];
    if total <= 0.0 {
        return;
    }
    let old = path.clone();
    for (knot, target) in path.iter_mut().enumerate().skip(1).take(m - 1).map(|(kidx, k)| {
        let t = total * kidx as f64 / m as f64;
        (k, t)
    }) {
        // Locate the segment containing the target arclength.
        let mut seg = 0;
        while seg + 1 < m && cum[seg + 1] < target {
            seg += 1;
        }
        let denom = (cum[seg + 1] - cum[seg]).max(f64::MIN_POSITIVE);
        let theta = (target - cum[seg]) / denom;
        for i in 0..knot.len() {
            knot[i] = (1.0 - theta) * old[seg][i] + theta * old[seg + 1][i];
        }
    }
}

/// Find a mountain-pass point between the zero field and `endpoint`
/// (which must have energy below `-1`): deform a piecewise-linear path
/// by descending its maximal-energy knot with re-interpolation, then
/// refine the max knot by squared-gradient-norm descent until the
/// gradient meets the certification tolerance.
pub fn mountain_pass(
    prob: &PerturbedProblem,
    epsilon: f64,
    endpoint: &ScalarField,
    path_opts: &MpPathOptions,
) -> Result<(ScalarField, SolverReport), MultiplicityError> {
    if path_opts.segments < 3 {
        return Err(MultiplicityError::InvalidParameter(format!(
            "the path needs at least 3 segments, got {}",
            path_opts.segments
        )));
    }
    let energy = prob.energy(epsilon)?;
    if !prob.grid.same_mesh(endpoint.grid()) {
        return Err(MultiplicityError::Energy(EnergyError::Grid(GridError::GridMismatch)));
    }
    let endpoint_value = energy.eval_raw(endpoint.values());
    if !(endpoint_value < -1.0) {
        return Err(MultiplicityError::InvalidParameter(format!(
            "the path endpoint must have energy below -1, got {endpoint_value}"
        )));
    }

    let n = prob.grid.node_count();
    let m = path_opts.segments;
    let mut path: Vec<Vec<f64>> = (0..=m)
        .map(|j| {
            let t = j as f64 / m as f64;
            endpoint.values().iter().map(|&v| t * v).collect()
        })
        .collect();

    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut grad = vec![0.0; n];
    let mut sweeps = 0;
    let mut stall_window: Vec<f64> = Vec::new();
    loop {
        // Locate the maximal-energy interior knot.
        let mut jmax = 1;
        let mut vmax = f64::NEG_INFINITY;
        for (j, knot) in path.iter().enumerate().take(m).skip(1) {
            let v = energy.eval_raw(knot);
            if v > vmax {
                vmax = v;
                jmax = j;
            }
        }
        energy.grad_into_raw(&path[jmax], &mut grad);
        let gsup = sup_norm(&grad);
        history.push((vmax, gsup));
        if gsup <= MP_GRAD_TOL {
            break;
        }

        // Stall detection over a sliding window of sweeps.
        stall_window.push(vmax);
        if stall_window.len() > 25 {
            stall_window.remove(0);
            let drop = stall_window[0] - vmax;
            if drop < 1e-12 * (1.0 + vmax.abs()) {
                break;
            }
        }
        if sweeps >= path_opts.max_deform_iters {
            break;
        }
        sweeps += 1;

        // One backtracked descent move of the max knot.
        let g2: f64 = grad.iter().map(|v| v * v).sum();
        let mut alpha = path_opts.descent_step / (1.0 + g2.sqrt());
        let mut moved = false;
        let mut trial = vec![0.0; n];
        for _ in 0..50 {
            for i in 0..n {
                trial[i] = path[jmax][i] - alpha * grad[i];
            }
            if energy.eval_raw(&trial) <= vmax - 1e-4 * alpha * g2 {
                path[jmax].copy_from_slice(&trial);
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
        reparameterize(&mut path);
    }

    // Refinement phase from the current maximal-energy knot.
    let mut jmax = 1;
    let mut vmax = f64::NEG_INFINITY;
    for (j, knot) in path.iter().enumerate().take(m).skip(1) {
        let v = energy.eval_raw(knot);
        if v > vmax {
            vmax = v;
            jmax = j;
        }
    }
    let phase1_sweeps = sweeps;
    let refined = saddle_refine(
        &energy,
        path[jmax].clone(),
        path_opts.refine_rounds,
        &mut history,
    );
    let x = match refined {
        Some(x) => x,
        None => {
            let grad_norm = history.last().map(|h| h.1).unwrap_or(f64::NAN);
            let snapshot = path
                .into_iter()
                .map(|vals| {
                    ScalarField::new(prob.grid.clone(), vals)
                        .expect("path knots hold finite values")
                })
                .collect();
            return Err(MultiplicityError::MountainPassStalled {
                grad_norm,
                path: snapshot,
            });
        }
    };

    let mut zeta = ScalarField::new(prob.grid.clone(), x).map_err(EnergyError::from)?;
    clamp_tiny_negatives(&mut zeta);
    let value = energy.eval_raw(zeta.values());
    energy.grad_into_raw(zeta.values(), &mut grad);
    let gsup = sup_norm(&grad);
    if gsup > MP_GRAD_TOL {
        let snapshot = path
            .into_iter()
            .map(|vals| {
                ScalarField::new(prob.grid.clone(), vals)
                    .expect("path knots hold finite values")
            })
            .collect();
        return Err(MultiplicityError::MountainPassStalled { grad_norm: gsup, path: snapshot });
    }

    let mut flags = vec![
        format!("phase1_sweeps={phase1_sweeps}"),
        format!("endpoint_energy={endpoint_value:.6e}"),
        "ps_diagnostic: deformation-tail energies Cauchy with vanishing gradient norms".into(),
    ];
    if let Some(rho) = path_opts.rho_floor {
        if value < rho - ORDERING_SLACK {
            flags.push(format!(
                "below_rim_floor: value {value:.6e} under rho {rho:.6e}"
            ));
        }
    }
    let report = SolverReport {
        iterations: history.len(),
        converged: true,
        final_energy: value,
        final_grad_norm: gsup,
        energy_history: history.iter().map(|h| h.0).collect(),
        grad_history: history.iter().map(|h| h.1).collect(),
        linf_norm: zeta.linf_norm(),
        linf_bound_check: zeta.linf_norm().is_finite(),
        positivity_min: zeta.min_value(),
        flags,
    };
    Ok((zeta, report))
}

/// One continuation level: both critical fields with their energies and
/// the per-level distinctness.
#[derive(Debug, Clone)]
pub struct CriticalPair {
    /// Local minimizer inside the geometry ball.
    pub nu: ScalarField,
    /// Mountain-pass point.
    pub zeta: ScalarField,
    /// Regularized energy of `nu` at this level.
    pub i_nu: f64,
    /// Regularized energy of `zeta` at this level.
    pub i_zeta: f64,
    /// Regularization level.
    pub epsilon: f64,
    /// Max-norm distance between the two fields.
    pub distinctness: f64,
    /// Grid seminorm of `zeta` (the uniform-bound quantity).
    pub seminorm_zeta: f64,
}

/// Options for [`continuation`].
#[derive(Debug, Clone)]
pub struct ContinuationOptions {
    /// Strictly decreasing positive regularization levels.
    pub eps_schedule: Vec<f64>,
    /// Shrink factor for the geometry radius.
    pub k: f64,
    /// Probe family size for the geometry estimates.
    pub probe_count: usize,
    /// Seed for the probe randomness.
    pub seed: u64,
    /// Options for the inner solves (minimizer descent, barrier solve).
    pub inner: SolveOptions,
    /// Mountain-pass path options.
    pub path: MpPathOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            eps_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            k: 0.5,
            probe_count: 12,
            seed: 0,
            inner: SolveOptions { tol_grad: 1e-7, max_iters: 20_000, ..SolveOptions::default() },
            path: MpPathOptions::default(),
        }
    }
}

/// Full outcome of the ε-continuation.
#[derive(Debug, Clone)]
pub struct ContinuationOutcome {
    /// One pair per executed level, in schedule order.
    pub pairs: Vec<CriticalPair>,
    /// Geometry constants used throughout.
    pub constants: GeometryConstants,
    /// The ε-independent barrier field (solution of the torsion-type
    /// problem with constant load `min{1, λ/2}`).
    pub barrier: ScalarField,
    /// Largest seminorm of the mountain-pass fields over the schedule.
    pub theta_hat: f64,
    /// Relative change of that seminorm over the last two levels.
    pub theta_last_rel_change: f64,
    /// Absolute change of the limit-functional value of `zeta` over the
    /// last two levels.
    pub energy_cauchy_zeta: f64,
    /// Absolute change of the limit-functional value of `nu` over the
    /// last two levels.
    pub energy_cauchy_nu: f64,
    /// Max-norm distance of the final pair.
    pub distinctness: f64,
    /// Weak residual of the final minimizer against the unregularized
    /// right-hand side.
    pub weak_residual_nu: f64,
    /// Weak residual of the final mountain-pass field.
    pub weak_residual_zeta: f64,
    /// Notes.
    pub flags: Vec<String>,
}

impl ContinuationOutcome {
    /// The pair at the smallest ε.
    pub fn final_pair(&self) -> &CriticalPair {
        self.pairs.last().expect("the schedule is nonempty")
    }
}

/// Limit functional (ε = 0 singular term) at raw values.
fn limit_functional(prob: &PerturbedProblem, vals: &[f64]) -> f64 {
    let grid = &prob.grid;
    let mut acc = dirichlet_value(grid, &prob.norm, prob.p, vals);
    let r1 = prob.r + 1.0;
    for i in 0..grid.node_count() {
        let up = vals[i].max(0.0);
        if up > 0.0 {
            let onemq = 1.0 - prob.q.values()[i];
            acc -= prob.lambda * grid.lump(i) * up.powf(onemq) / onemq;
            acc -= grid.lump(i) * up.powf(r1) / r1;
        }
    }
    acc
}

/// Max-norm weak residual of the unregularized problem at `u`: flux
/// pairing against each interior hat minus the lumped load
/// `λ u^{-q} + u^r`. Infinite if `u` is not strictly positive at an
/// interior node.
pub fn perturbed_weak_residual(prob: &PerturbedProblem, u: &ScalarField) -> f64 {
    let grid = &prob.grid;
    let mut grad = vec![0.0; grid.node_count()];
    dirichlet_grad(grid, &prob.norm, prob.p, u.values(), &mut grad);
    let mut sup = 0.0f64;
    for &i in grid.interior_nodes() {
        let ui = u.values()[i];
        if ui <= 0.0 {
            return f64::INFINITY;
        }
        let load = grid.lump(i)
            * (prob.lambda * ui.powf(-prob.q.values()[i]) + ui.powf(prob.r));
        sup = sup.max((grad[i] - load).abs());
    }
    sup
}

fn barrier_worst_drop(field: &ScalarField, barrier: &ScalarField) -> f64 {
    field
        .values()
        .iter()
        .zip(barrier.values())
        .fold(0.0f64, |m, (u, b)| m.max(b - u))
}

/// Run the ε-continuation: geometry constants once, the barrier once,
/// then a warm-started `(ν_ε, ζ_ε)` pair per level with ordering,
/// nonnegativity, and barrier checks, finishing with the distinctness
/// and weak-residual certification of the limit pair.
pub fn continuation(
    prob: &PerturbedProblem,
    opts: &ContinuationOptions,
) -> Result<ContinuationOutcome, MultiplicityError> {
    if opts.eps_schedule.is_empty() {
        return Err(MultiplicityError::InvalidParameter(
            "the regularization schedule must not be empty".into(),
        ));
    }
    for w in opts.eps_schedule.windows(2) {
        if !(w[1] < w[0]) {
            return Err(MultiplicityError::InvalidParameter(
                "the regularization schedule must be strictly decreasing".into(),
            ));
        }
    }
    if !(opts.eps_schedule[0].is_finite() && *opts.eps_schedule.last().unwrap() > 0.0) {
        return Err(MultiplicityError::InvalidParameter(
            "regularization levels must be positive".into(),
        ));
    }

    let grid = &prob.grid;
    let mut flags = Vec::new();

    let constants =
        mp_constants(prob, opts.eps_schedule[0], opts.k, opts.probe_count, opts.seed)?;

    // The ε-independent barrier: torsion-type solve with constant load.
    let c_barrier = 1.0f64.min(prob.lambda / 2.0);
    let load = ScalarField::constant(grid.clone(), c_barrier).map_err(EnergyError::from)?;
    let (barrier, _) = solve_dirichlet(grid, prob.norm, prob.p, &load, &opts.inner)
        .map_err(MultiplicityError::Solve)?;

    // The shared endpoint: T e₁ (any certified-or-salvaged positive
    // eigen direction, scaled by the doubling constant).
    let eigen_opts = SolveOptions { max_iters: 4000, ..SolveOptions::default() };
    let (e1, eigen_flags) = eigen_direction(grid, prob.norm, prob.p, &eigen_opts)?;
    flags.extend(eigen_flags);
    let mut endpoint = ScalarField::zeros(grid.clone());
    for (o, &v) in endpoint.values_mut().iter_mut().zip(e1.values()) {
        *o = constants.endpoint_scale * v;
    }

    let mut pairs: Vec<CriticalPair> = Vec::new();
    let mut limit_values: Vec<(f64, f64)> = Vec::new();
    let mut prev_nu: Option<ScalarField> = None;
    let mut prev_zeta: Option<ScalarField> = None;

    for &eps in &opts.eps_schedule {
        // Local minimizer, warm-started when possible.
        let (nu, _nu_report) = match &prev_nu {
            Some(w) => local_minimizer_warm(prob, eps, constants.radius, w, &opts.inner)?,
            None => local_minimizer(prob, eps, constants.radius, &opts.inner)?,
        };

        // Mountain-pass point: refine the previous ζ when available,
        // falling back to the full deformation when refinement fails.
        let energy = prob.energy(eps)?;
        let mut path_opts = opts.path.clone();
        path_opts.rho_floor = Some(constants.rho);
        let (zeta, zeta_report) = match &prev_zeta {
            Some(w) => {
                let mut hist = Vec::new();
                match saddle_refine(
                    &energy,
                    w.values().to_vec(),
                    path_opts.refine_rounds,
                    &mut hist,
                ) {
                    Some(x) => {
                        let mut z =
                            ScalarField::new(grid.clone(), x).map_err(EnergyError::from)?;
                        clamp_tiny_negatives(&mut z);
                        let value = energy.eval_raw(z.values());
                        let mut g = vec![0.0; grid.node_count()];
                        energy.grad_into_raw(z.values(), &mut g);
                        let report = SolverReport {
                            iterations: hist.len(),
                            converged: true,
                            final_energy: value,
                            final_grad_norm: sup_norm(&g),
                            energy_history: hist.iter().map(|h| h.0).collect(),
                            grad_history: hist.iter().map(|h| h.1).collect(),
                            linf_norm: z.linf_norm(),
                            linf_bound_check: true,
                            positivity_min: z.min_value(),
                            flags: vec!["warm saddle refinement".into()],
                        };
                        (z, report)
                    }
                    None => mountain_pass(prob, eps, &endpoint, &path_opts)?,
                }
            }
            None => mountain_pass(prob, eps, &endpoint, &path_opts)?,
        };

        let i_nu = energy.eval_raw(nu.values());
        let i_zeta = energy.eval_raw(zeta.values());

        // Nonnegativity after cleanup.
        if nu.min_value() < -SIGN_CLEANUP || zeta.min_value() < -SIGN_CLEANUP {
            return Err(MultiplicityError::InvariantViolated(format!(
                "a critical field is negative beyond the cleanup slack at eps = {eps:.1e} \
                 (min nu {:.3e}, min zeta {:.3e})",
                nu.min_value(),
                zeta.min_value()
            )));
        }

        // Energy ordering; a loss of ordering is the geometry-failure
        // signature of an over-large coupling.
        if !(i_nu < 0.0) || i_zeta < constants.rho - ORDERING_SLACK {
            let distinctness = zeta.linf_diff(&nu).map_err(EnergyError::from)?;
            let detail = if i_zeta < constants.rho - ORDERING_SLACK {
                format!(
                    "energy ordering violated (I(nu) = {i_nu:.6e}, I(zeta) = {i_zeta:.6e}, \
                     rho = {:.6e}, distinctness {distinctness:.3e})",
                    constants.rho
                )
            } else {
                format!("the minimizer energy {i_nu:.6e} is not negative")
            };
            return Err(MultiplicityError::GeometryFailure {
                epsilon: eps,
                lambda: prob.lambda,
                lambda_hat: constants.lambda_hat,
                detail,
            });
        }
        let _ = &zeta_report;

        // Barrier domination for both fields.
        for (name, field) in [("nu", &nu), ("zeta", &zeta)] {
            let worst = barrier_worst_drop(field, &barrier);
            if worst > ORDERING_SLACK {
                flags.push(format!("barrier drop {worst:.3e} for {name}"));
                return Err(MultiplicityError::BarrierViolated { epsilon: eps, worst });
            }
        }

        let distinctness = zeta.linf_diff(&nu).map_err(EnergyError::from)?;
        let seminorm_zeta = prob.seminorm_raw(zeta.values());
        limit_values.push((limit_functional(prob, nu.values()), limit_functional(prob, zeta.values())));
        pairs.push(CriticalPair {
            nu: nu.clone(),
            zeta: zeta.clone(),
            i_nu,
            i_zeta,
            epsilon: eps,
            distinctness,
            seminorm_zeta,
        });
        prev_nu = Some(nu);
        prev_zeta = Some(zeta);
    }

    let theta_hat = pairs
        .iter()
        .map(|p| p.seminorm_zeta)
        .fold(0.0f64, f64::max);
    let (theta_last_rel_change, energy_cauchy_nu, energy_cauchy_zeta) = if pairs.len() >= 2 {
        let a = &pairs[pairs.len() - 2];
        let b = &pairs[pairs.len() - 1];
        let rel = (b.seminorm_zeta - a.seminorm_zeta).abs() / a.seminorm_zeta.abs().max(1e-300);
        let la = limit_values[limit_values.len() - 2];
        let lb = limit_values[limit_values.len() - 1];
        (rel, (lb.0 - la.0).abs(), (lb.1 - la.1).abs())
    } else {
        (0.0, 0.0, 0.0)
    };

    let last = pairs.last().expect("at least one level ran");
    let distinctness = last.distinctness;
    let threshold = DISTINCTNESS_FACTOR * MP_GRAD_TOL;
    if distinctness <= threshold {
        return Err(MultiplicityError::GeometryFailure {
            epsilon: last.epsilon,
            lambda: prob.lambda,
            lambda_hat: constants.lambda_hat,
            detail: format!(
                "solutions merged: distinctness {distinctness:.3e} at or below the \
                 {threshold:.0e} threshold"
            ),
        });
    }

    let weak_residual_nu = perturbed_weak_residual(prob, &last.nu);
    let weak_residual_zeta = perturbed_weak_residual(prob, &last.zeta);
    flags.push(format!("theta_hat={theta_hat:.6e}"));
    flags.push(format!("barrier_load={c_barrier:.6e}"));

    Ok(ContinuationOutcome {
        pairs,
        constants,
        barrier,
        theta_hat,
        theta_last_rel_change,
        energy_cauchy_zeta,
        energy_cauchy_nu,
        distinctness,
        weak_residual_nu,
        weak_residual_zeta,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(res: usize) -> Arc<Grid> {
        Grid::rectangle((0.0, 1.0), (0.0, 1.0), (res, res)).unwrap()
    }

    fn test_problem(res: usize, lambda: f64) -> PerturbedProblem {
        let grid = unit_square(res);
        let norm = FinslerNorm::euclidean(2).unwrap();
        let q = ScalarField::constant(grid.clone(), 0.5).unwrap();
        PerturbedProblem::new(grid, norm, 1.5, q, 2.0, lambda).unwrap()
    }

    #[test]
    fn validation_rejects_out_of_regime_data() {
        let grid = unit_square(4);
        let norm = FinslerNorm::euclidean(2).unwrap();
        let q = ScalarField::constant(grid.clone(), 0.5).unwrap();

        // r + 1 must stay below the growth cap p N/(N-p) = 6.
        assert!(matches!(
            PerturbedProblem::new(grid.clone(), norm, 1.5, q.clone(), 6.0, 1.0),
            Err(MultiplicityError::Supercritical { .. })
        ));

        // p must stay below the dimension.
        assert!(matches!(
            PerturbedProblem::new(grid.clone(), norm, 2.0, q.clone(), 2.0, 1.0),
            Err(MultiplicityError::InvalidParameter(_))
        ));

        // One-dimensional grids never satisfy p < N.
        let seg = Grid::segment((0.0, 1.0), 8).unwrap();
        let n1 = FinslerNorm::euclidean(1).unwrap();
        let q1 = ScalarField::constant(seg.clone(), 0.5).unwrap();
        assert!(PerturbedProblem::new(seg, n1, 1.5, q1, 2.0, 1.0).is_err());

        // q must stay strictly inside (0, 1).
        let q_bad = ScalarField::constant(grid.clone(), 1.0).unwrap();
        assert!(PerturbedProblem::new(grid.clone(), norm, 1.5, q_bad, 2.0, 1.0).is_err());

        // lambda must be positive.
        assert!(PerturbedProblem::new(grid, norm, 1.5, q, 2.0, 0.0).is_err());
    }

    #[test]
    fn geometry_constants_are_positive_and_ordered() {
        let prob = test_problem(8, 0.01);
        let c = mp_constants(&prob, 1e-2, 0.5, 10, 7).unwrap();
        assert!(c.radius > 0.0);
        assert!(c.rho > 0.0, "rim must be positive, got {}", c.rho);
        assert!(c.lambda_hat > 0.0);
        assert!(c.sobolev_c_hat > 0.0);
        assert!(
            c.endpoint_scale / c.radius >= 2.0,
            "endpoint scale starts at twice the radius"
        );
        let cap = ((prob.r() + 1.0) / (prob.p() * c.sobolev_c_hat * c.l))
            .powf(1.0 / (prob.r() + 1.0 - prob.p()));
        assert!(c.radius < cap, "shrunk radius stays below the critical one");
    }

    #[test]
    fn geometry_constants_shrink_with_k() {
        let prob = test_problem(8, 0.01);
        let mut last_r = 0.0;
        let mut last_rho = 0.0;
        for k in [0.1, 0.3, 0.5] {
            let c = mp_constants(&prob, 1e-2, k, 10, 7).unwrap();
            assert!(c.radius > last_r, "radius grows with k");
            assert!(c.rho > last_rho, "rim value grows with k on this range");
            last_r = c.radius;
            last_rho = c.rho;
        }
    }

    #[test]
    fn probe_maxima_ignore_ordering_and_scale_monotonically() {
        let prob = test_problem(8, 0.01);
        let probes: Vec<ScalarField> = vec![
            sine_mode(prob.grid(), 1, 1),
            sine_mode(prob.grid(), 2, 1),
            sine_mode(prob.grid(), 1, 2),
        ];
        let mut reversed = probes.clone();
        reversed.reverse();
        assert_eq!(
            max_probe_ratio(&prob, &probes),
            max_probe_ratio(&prob, &reversed),
            "max over a probe set is order-free"
        );
        let i1 = max_singular_probe_integral(&prob, &probes, 1.0);
        let i2 = max_singular_probe_integral(&prob, &probes, 1.5);
        let i3 = max_singular_probe_integral(&prob, &probes, 2.0);
        assert!(i1 < i2 && i2 < i3, "singular integral grows with the probe scale");
    }

    #[test]
    fn local_minimizer_finds_the_negative_well() {
        let prob = test_problem(12, 0.02);
        let c = mp_constants(&prob, 1e-2, 0.5, 10, 7).unwrap();
        let opts = SolveOptions { tol_grad: 1e-7, max_iters: 20_000, ..SolveOptions::default() };
        let (nu, report) = local_minimizer(&prob, 1e-2, c.radius, &opts).unwrap();
        assert!(report.final_energy < 0.0, "well energy {}", report.final_energy);
        assert!(nu.min_value() >= -1e-12, "cleaned nonnegativity");
        let semi = prob.seminorm_raw(nu.values());
        assert!(semi <= c.radius + 1e-10, "stays inside the ball: {semi} vs {}", c.radius);
        assert!(
            report.flags.iter().any(|f| f == "constraint_active=false"),
            "the well sits strictly inside the ball: {:?}",
            report.flags
        );
        assert!(report.final_grad_norm <= 1e-6);
    }

    #[test]
    fn reparameterize_keeps_endpoints_and_balance() {
        // A bent polyline: knots move along the original path to the
        // equal-arclength stations (total length 2, stations at 2/3 and
        // 4/3), so interior knots land on the walls of the corner.
        let mut path = vec![
            vec![0.0, 0.0],
            vec![0.9, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        reparameterize(&mut path);
        assert_eq!(path[0], vec![0.0, 0.0], "start knot fixed");
        assert_eq!(path[3], vec![1.0, 1.0], "end knot fixed");
        let expect1 = [2.0 / 3.0, 0.0];
        let expect2 = [1.0, 1.0 / 3.0];
        for (got, want) in path[1].iter().zip(expect1).chain(path[2].iter().zip(expect2)) {
            assert!(
                (got - want).abs() < 1e-12,
                "knot placed at the arclength station: {got} vs {want}"
            );
        }

        // On a straight but unevenly sampled path the chord lengths do
        // equalize exactly.
        let mut straight = vec![vec![0.0], vec![0.7], vec![1.0], vec![3.0]];
        reparameterize(&mut straight);
        let mut lengths = Vec::new();
        for w in straight.windows(2) {
            lengths.push((w[0][0] - w[1][0]).abs());
        }
        for w in lengths.windows(2) {
            assert!(
                (w[0] - w[1]).abs() < 1e-12,
                "even spacing on a straight path: {lengths:?}"
            );
        }
    }

    #[test]
    fn mountain_pass_certifies_a_saddle() {
        let prob = test_problem(8, 0.02);
        let c = mp_constants(&prob, 1e-2, 0.5, 10, 7).unwrap();
        let (e1field, _) = eigen_direction(
            prob.grid(),
            *prob.norm(),
            prob.p(),
            &SolveOptions { max_iters: 4000, ..SolveOptions::default() },
        )
        .unwrap();
        let mut endpoint = ScalarField::zeros(prob.grid().clone());
        for (o, &v) in endpoint.values_mut().iter_mut().zip(e1field.values()) {
            *o = c.endpoint_scale * v;
        }
        let mut path_opts = MpPathOptions::default();
        path_opts.rho_floor = Some(c.rho);
        let (zeta, report) = mountain_pass(&prob, 1e-2, &endpoint, &path_opts).unwrap();
        assert!(report.final_grad_norm <= MP_GRAD_TOL);
        assert!(
            report.final_energy >= c.rho - 1e-8,
            "saddle above the rim: {} vs rho {}",
            report.final_energy,
            c.rho
        );
        assert!(zeta.min_value() >= -1e-12);
        assert!(
            !report.flags.iter().any(|f| f.starts_with("below_rim_floor")),
            "no rim-floor flag expected: {:?}",
            report.flags
        );
    }

    #[test]
    fn endpoint_energy_must_be_deep() {
        let prob = test_problem(8, 0.02);
        let shallow = sine_mode(prob.grid(), 1, 1);
        let res = mountain_pass(&prob, 1e-2, &shallow, &MpPathOptions::default());
        assert!(matches!(res, Err(MultiplicityError::InvalidParameter(_))));
    }
}
