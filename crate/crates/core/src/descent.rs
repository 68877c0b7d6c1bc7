//! Crate-private limited-memory quasi-Newton descent.
//!
//! The solvers minimize discrete functionals over nodal vectors whose
//! boundary entries are pinned to zero. Objective gradients vanish on
//! the boundary, so the fixed subspace is invariant under the update and
//! the iteration can run on full nodal vectors without index mapping.
//!
//! The method is standard two-loop L-BFGS with backtracking Armijo line
//! search, falling back to steepest descent when a quasi-Newton
//! direction fails. Pairs with nonpositive curvature are skipped, which
//! keeps the engine usable on the nonconvex saddle-refinement
//! objectives as well as on the convex ones. Near the arithmetic floor,
//! where the true decrease per step drops below the roundoff of the
//! evaluated value, the value comparison goes blind while the gradient
//! norm is still perfectly measurable, so a trial is also accepted when
//! its value stays inside a narrow noise band and its euclidean
//! gradient norm strictly contracts. That keeps well-scaled
//! quasi-Newton steps flowing right down to the gradient's own
//! representable floor instead of stalling an order of magnitude above
//! it.

/// Objective evaluated by the descent engine on raw nodal vectors.
pub(crate) trait Objective {
    /// Value and gradient at `x`; `grad` has the layout of `x` and must
    /// come back zero wherever the problem pins a degree of freedom.
    /// An infinite value marks `x` as inadmissible (outside a
    /// constraint set); such trials are never accepted.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Tuning knobs for [`lbfgs`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct DescentOptions {
    /// Stop when the max-norm of the gradient falls below this.
    pub tol_grad: f64,
    /// Iteration cap.
    pub max_iters: usize,
    /// Backtracking shrink factor.
    pub ls_shrink: f64,
    /// Armijo sufficient-decrease constant.
    pub ls_c1: f64,
    /// Maximum backtracking steps per direction.
    pub ls_max: usize,
    /// Number of curvature pairs retained.
    pub memory: usize,
    /// Record per-iterate value and gradient-norm histories.
    pub record_history: bool,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            tol_grad: 1e-9,
            max_iters: 10_000,
            ls_shrink: 0.5,
            ls_c1: 1e-4,
            ls_max: 60,
            memory: 10,
            record_history: false,
        }
    }
}

/// Outcome of a descent run.
#[derive(Debug, Clone)]
pub(crate) struct DescentResult {
    /// Final iterate.
    pub x: Vec<f64>,
    /// Final functional value.
    pub value: f64,
    /// Final gradient max-norm.
    pub grad_norm: f64,
    /// Accepted iterations performed.
    pub iterations: usize,
    /// Whether `grad_norm <= tol_grad` was reached.
    pub converged: bool,
    /// Whether the run ended because no further decrease was possible.
    pub stalled: bool,
    /// Value at each accepted iterate (starting point included), when
    /// history recording is on.
    pub energy_history: Vec<f64>,
    /// Gradient norm at each accepted iterate, when history recording
    /// is on.
    pub grad_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Minimize `obj` from `x0`.
pub(crate) fn lbfgs<O: Objective + ?Sized>(
    obj: &O,
    x0: Vec<f64>,
    opts: &DescentOptions,
) -> DescentResult {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = obj.value_grad(&x, &mut g);
    let mut gsup = sup_norm(&g);
    let mut g2 = norm(&g);

    let mut energy_history = Vec::new();
    let mut grad_history = Vec::new();
    if opts.record_history {
        energy_history.push(f);
        grad_history.push(gsup);
    }

    // Curvature pair ring buffer.
    let mut s_list: Vec<Vec<f64>> = Vec::new();
    let mut y_list: Vec<Vec<f64>> = Vec::new();
    let mut rho_list: Vec<f64> = Vec::new();

    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha_coeffs = vec![0.0; opts.memory.max(1)];

    let mut iterations = 0;
    let mut converged = gsup <= opts.tol_grad;
    let mut stalled = false;
    let mut flat_commits: u32 = 0;

    while !converged && iterations < opts.max_iters {
        // Two-loop recursion for dir = -H g.
        dir.copy_from_slice(&g);
        for (k, (s, y)) in s_list.iter().zip(&y_list).enumerate().rev() {
            let a = rho_list[k] * dot(s, &dir);
            alpha_coeffs[k] = a;
            for (d, yi) in dir.iter_mut().zip(y) {
                *d -= a * yi;
            }
        }
        if let (Some(s), Some(y)) = (s_list.last(), y_list.last()) {
            let gamma = dot(s, y) / dot(y, y);
            for d in dir.iter_mut() {
                *d *= gamma;
            }
        }
        for (k, (s, y)) in s_list.iter().zip(&y_list).enumerate() {
            let b = rho_list[k] * dot(y, &dir);
            let a = alpha_coeffs[k];
            for (d, si) in dir.iter_mut().zip(s) {
                *d += (a - b) * si;
            }
        }
        for d in dir.iter_mut() {
            *d = -*d;
        }

        let mut gd = dot(&g, &dir);
        let mut used_fallback = s_list.is_empty();
        if !(gd < 0.0) {
            // Not a descent direction; restart from steepest descent.
            for (d, gi) in dir.iter_mut().zip(&g) {
                *d = -gi;
            }
            gd = -dot(&g, &g);
            used_fallback = true;
            s_list.clear();
            y_list.clear();
            rho_list.clear();
        }

        // On pure gradient steps, scale the initial trial to unit length
        // so enormous first gradients do not force dozens of halvings.
        let alpha0 = if used_fallback { (1.0 / norm(&dir)).min(1.0) } else { 1.0 };

        // Backtracking accepts a trial on the classic sufficient
        // decrease, or, because evaluated values wobble by a few ulps
        // near the minimum where the true decrease per step drops below
        // that noise, on floor progress: a value inside the noise band
        // together with a strict contraction of the gradient norm.
        // Trials too small to change the iterate are rejected outright
        // so a step that rounds to a no-op can never be committed.
        let noise_band = 1e-12 * (1.0 + f.abs());
        let dir_sup = sup_norm(&dir);
        let x_sup = sup_norm(&x);
        let mut alpha = alpha0;
        let mut accepted = false;
        let mut f_new = f;
        for _ in 0..opts.ls_max {
            if alpha * dir_sup <= f64::EPSILON / 2.0 * (1.0 + x_sup) {
                break;
            }
            for i in 0..n {
                x_new[i] = x[i] + alpha * dir[i];
            }
            let f_try = obj.value_grad(&x_new, &mut g_new);
            // Subtraction form: a trial that rounds back to the current
            // iterate gives a difference of exactly zero and fails, even
            // when the tiny right-hand side would be absorbed into f.
            let armijo = f_try - f <= opts.ls_c1 * alpha * gd;
            let floor_progress =
                f_try <= f + noise_band && norm(&g_new) <= 0.9999 * g2;
            if armijo || floor_progress {
                accepted = true;
                f_new = f_try;
                break;
            }
            alpha *= opts.ls_shrink;
        }
        if !accepted {
            if used_fallback {
                // Even steepest descent cannot make measurable
                // progress: the iterate is as stationary as the
                // arithmetic allows.
                stalled = true;
                break;
            }
            // Drop the quasi-Newton history and retry from scratch.
            s_list.clear();
            y_list.clear();
            rho_list.clear();
            continue;
        }

        // Store the curvature pair when it is positive enough.
        let mut s = vec![0.0; n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        let sy = dot(&s, &y);
        // Skip noise pairs: curvature must be positive and the step
        // must be well above the representable resolution of x.
        if sy > 1e-12 * norm(&s) * norm(&y) && norm(&s) > 1e-13 * (1.0 + norm(&x)) {
            if s_list.len() == opts.memory {
                s_list.remove(0);
                y_list.remove(0);
                rho_list.remove(0);
            }
            s_list.push(s);
            y_list.push(y);
            rho_list.push(1.0 / sy);
        }

        let new_gsup = sup_norm(&g_new);
        let new_g2 = norm(&g_new);
        if f_new >= f && new_g2 >= g2 {
            flat_commits += 1;
            if flat_commits >= 5 {
                // Accepted steps that move neither measure: the
                // iteration is cycling inside the noise band.
                stalled = true;
                break;
            }
        } else {
            flat_commits = 0;
        }

        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        f = f_new;
        gsup = new_gsup;
        g2 = new_g2;
        iterations += 1;
        if opts.record_history {
            energy_history.push(f);
            grad_history.push(gsup);
        }
        converged = gsup <= opts.tol_grad;
    }

    DescentResult {
        x,
        value: f,
        grad_norm: gsup,
        iterations,
        converged,
        stalled,
        energy_history,
        grad_history,
    }
}
