//! Solvers for anisotropic p-Laplace problems built around a Finsler
//! (Minkowski) norm `H` on the gradient.
//!
//! The crate is organized bottom-up:
//!
//! * [`norm`]: the norm family `H`, its gradient, the degenerate flux
//!   `H^{p-1} ∇H`, the dual norm, and sampled verification of the
//!   structural hypotheses the solvers rely on.
//! * [`grid`]: uniform simplicial grids on axis-aligned boxes in 1D/2D,
//!   P1 nodal fields, per-simplex gradients, lumped and exact quadrature.
//! * [`energy`]: the convex Dirichlet functional and the perturbed
//!   singular functional, with exact nodal gradients and a
//!   finite-difference check.
//! * [`convex`]: damped limited-memory descent for the Dirichlet
//!   problem and Rayleigh-quotient minimization for the first eigenpair.
//! * [`singular`]: the truncated/shifted approximation ladder for the
//!   purely singular problem, with monotone continuation in the
//!   truncation level.
//! * [`multiplicity`]: mountain-pass geometry constants, the local
//!   minimizer and saddle search for the perturbed problem, and the
//!   regularization continuation that produces two distinct solutions.
//! * [`io`]: deterministic CSV/report emission shared by tests and the
//!   command-line driver.

pub mod convex;
pub mod energy;
pub mod grid;
pub mod io;
pub mod multiplicity;
pub mod norm;
pub mod singular;

mod descent;
mod quadrature;

pub use convex::{eigenpair, solve_dirichlet, SolveError, SolveOptions, SolverReport};
pub use energy::{fd_check, ConvexEnergy, Energy, EnergyError, FdCheck, PerturbedEnergy};
pub use grid::{Grid, GridError, ScalarField};
pub use multiplicity::{
    continuation, local_minimizer, mountain_pass, mp_constants, ContinuationOptions,
    ContinuationOutcome, CriticalPair, GeometryConstants, MpPathOptions, MultiplicityError,
    PerturbedProblem,
};
pub use norm::{FinslerNorm, HypothesisReport, MonotonicityGap, NormError, NormKind};
pub use singular::{
    solve_singular, ApproxState, SingularError, SingularOptions, SingularProblem, SingularReport,
};
