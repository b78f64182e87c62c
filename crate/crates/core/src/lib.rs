//! Solvers for gradient-constrained obstacle problems whose constraint
//! set depends on the unknown itself, plus TV-regularized coefficient
//! identification on top of them.
//!
//! How it works:
//! * `grid` holds the uniform discretization of (0,1)^d and the field
//!   types everything else shares.
//! * `operator` evaluates the coefficient-weighted p-power gradient
//!   form and its convex energy.
//! * `inner` minimizes that energy over a fixed cellwise gradient-ball
//!   set by operator splitting, certifying the result with residuals
//!   recomputed from scratch.
//! * `qvi` wraps the inner solver in a fixed-point loop over the
//!   state-dependent radii and cross-checks solutions against an
//!   equivalent inequality formulation on sampled feasible points.
//! * `inverse` identifies the coefficient from observations by
//!   derivative-free descent over an admissible set with a total
//!   variation budget.
//!
//! Everything is deterministic: fixed summation orders, per-call
//! seeded RNG streams, no shared mutable state.

pub mod constraint;
pub mod error;
pub mod grid;
pub mod inner;
pub mod inverse;
pub mod operator;
pub mod problem;
pub mod qvi;

pub use constraint::{check_feasible, project_gradient, radii_of, sample_feasible, Feasibility, RadiusField};
pub use error::{Error, Result};
pub use grid::{cell_pairing, dual_pairing, gradient, gradient_adjoint, CellField, Grid, NodeField, VectorField};
pub use inner::{kkt_residual, solve_vi, InnerOptions, InnerSolution, KktReport, SplitState};
pub use inverse::{
    evaluate_objective, field_digest, identify, kappa_sweep, misfit, total_variation,
    tv_lower_bound_gap, AdmissibleSet, IdentHistory, IdentRecord, Identification, InverseConfig,
    MisfitData, ObjectiveEval, OptimizerOptions, SweepRow,
};
pub use operator::{energy, hoelder_gap, linearity_defect, monotone_gap, pairing, pairing_bound};
pub use problem::{phi_integral, validate, CheckResult, ConstraintSpec, PhiSpec, QviProblem, ValidationReport};
pub use qvi::{minty_check, solve_qvi, MintyReport, QviOptions, QviSolution, SolveReport};
