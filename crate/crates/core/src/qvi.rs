//! Outer fixed-point loop over the state-dependent constraint radii,
//! plus an independent certification route.
//!
//! The loop freezes the radii at the current iterate, solves the
//! resulting fixed-constraint problem with [`solve_vi`], and repeats
//! until the iterates stop moving in discrete L2. Whether that limit
//! really solves the implicit problem is then checked through a
//! different formulation entirely: [`minty_check`] evaluates the
//! one-sided slack `<T(a,v), v-u> + phi(v) - phi(u) - <m, v-u>` on
//! sampled feasible points, which must be nonnegative at a solution.
//! A negative slack falsifies; passing is evidence, not proof.

use std::time::{Duration, Instant};

use crate::constraint::{check_feasible, radii_of, sample_feasible};
use crate::error::{Error, Result};
use crate::grid::dual_pairing;
use crate::inner::{solve_vi, InnerOptions, KktReport, SplitState};
use crate::grid::{CellField, NodeField};
use crate::operator::pairing;
use crate::problem::{phi_integral, validate, QviProblem};

/// Options for [`solve_qvi`].
#[derive(Debug, Clone, PartialEq)]
pub struct QviOptions {
    pub inner: InnerOptions,
    pub max_outer: usize,
    /// Stop when `|u_next - u| <= tol_fp` in discrete L2.
    pub tol_fp: f64,
    /// Starting iterate; zero when absent. The computed solution is the
    /// fixed-point limit reached from this iterate, which is the
    /// deterministic selection rule reported alongside results.
    pub init: Option<NodeField>,
}

impl Default for QviOptions {
    fn default() -> Self {
        QviOptions { inner: InnerOptions::default(), max_outer: 100, tol_fp: 1e-7, init: None }
    }
}

/// Sampled certification outcome. Sample 0 is the candidate itself
/// (when feasible); samples 1..=count are seeded random feasible
/// fields, each probed along the segment from the candidate as well.
#[derive(Debug, Clone, PartialEq)]
pub struct MintyReport {
    /// Number of random draws.
    pub samples: usize,
    /// Smallest slack over all probes.
    pub min_slack: f64,
    /// Smallest slack normalized by `1 + |v - u|`.
    pub min_scaled_slack: f64,
    /// Sample index achieving the minimum (0 = the candidate itself).
    pub worst_v_index: usize,
    /// Whether the candidate itself satisfies its own constraints.
    pub self_feasible: bool,
}

/// Full outcome of the fixed-point solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub converged: bool,
    pub outer_iterations: usize,
    /// `|u_{k+1} - u_k|` per outer iteration.
    pub fp_residual_history: Vec<f64>,
    /// Certificate of the last inner solve.
    pub final_inner: KktReport,
    /// Violation of the candidate against its own radii.
    pub self_feasibility_violation: f64,
    /// Cheap fixed-seed certification run on the result.
    pub minty: Option<MintyReport>,
    /// Not compared anywhere: timing is the one nondeterministic field.
    pub wall_time: Duration,
}

impl SolveReport {
    /// Last fixed-point residual (infinite when no iteration ran).
    pub fn fp_residual(&self) -> f64 {
        self.fp_residual_history.last().copied().unwrap_or(f64::INFINITY)
    }

    /// The deterministic rule that picks one solution when several
    /// exist: the fixed-point limit reached from the configured
    /// starting iterate.
    pub fn selection_rule(&self) -> &'static str {
        "picard-fixed-point-from-init"
    }
}

/// Solver output.
#[derive(Debug, Clone)]
pub struct QviSolution {
    pub u: NodeField,
    pub report: SolveReport,
    /// Split state of the last inner solve, for external re-audits.
    pub split: SplitState,
}

const REPORT_MINTY_SAMPLES: usize = 16;
const REPORT_MINTY_SEED: u64 = 0;

/// Fixed-point iteration over the constraint radii. Each step solves
/// the problem with radii frozen at the previous iterate, warm-started
/// there. `converged` requires all of: the fixed-point residual within
/// `tol_fp`, the final iterate feasible for its own radii within the
/// inner tolerance, and a converged final inner solve.
pub fn solve_qvi(prob: &QviProblem, a: &CellField, opts: &QviOptions) -> Result<QviSolution> {
    if opts.max_outer == 0 {
        return Err(Error::InvalidConfig("max_outer must be at least 1".into()));
    }
    if !(opts.tol_fp > 0.0) || !opts.tol_fp.is_finite() {
        return Err(Error::InvalidConfig(format!("tol_fp must be positive, got {}", opts.tol_fp)));
    }
    if !validate(prob).all_passed() {
        return Err(Error::InvalidConfig(
            "problem fails validation; run validate() for the check list".into(),
        ));
    }
    prob.check_coefficient(a)?;
    if let Some(init) = &opts.init {
        if init.grid() != prob.grid() {
            return Err(Error::GridMismatch("init lives on a different grid".into()));
        }
    }

    let start = Instant::now();
    let mut u = opts.init.clone().unwrap_or_else(|| NodeField::zeros(prob.grid()));
    let mut history = Vec::new();
    let mut last: Option<(KktReport, SplitState)> = None;

    for _ in 1..=opts.max_outer {
        let r = radii_of(prob, &u)?;
        let sol = solve_vi(prob, a, &r, &opts.inner, Some(&u))?;
        let fp = sol.u.sub(&u).norm_l2h();
        history.push(fp);
        u = sol.u;
        last = Some((sol.report, sol.split));
        if fp <= opts.tol_fp {
            break;
        }
    }

    let (final_inner, split) = last.expect("at least one outer iteration ran");
    let self_r = radii_of(prob, &u)?;
    let self_feas = check_feasible(&u, &self_r, 0.0)?.max_violation;
    let minty = minty_check(prob, a, &u, REPORT_MINTY_SAMPLES, REPORT_MINTY_SEED)?;
    let fp_last = history.last().copied().unwrap_or(f64::INFINITY);
    let converged =
        fp_last <= opts.tol_fp && self_feas <= opts.inner.tol_kkt && final_inner.converged;

    let report = SolveReport {
        converged,
        outer_iterations: history.len(),
        fp_residual_history: history,
        final_inner,
        self_feasibility_violation: self_feas,
        minty: Some(minty),
        wall_time: start.elapsed(),
    };
    Ok(QviSolution { u, report, split })
}

/// One-sided solution check through the equivalent inequality in `v`:
/// at a solution, `slack(v) = <T(a,v), v-u> + phi(v) - phi(u) - <m, v-u>`
/// is nonnegative for every feasible `v`. Test points are the candidate
/// itself (slack exactly zero when feasible), its feasible rescalings
/// `(1 +- t) u`, and `samples` seeded feasible fields probed along the
/// segment from `u` (where violations surface first). The rescalings
/// matter: random feasible fields have small amplitude, so a wrongly
/// scaled candidate would otherwise only be probed along `-u`, a
/// direction in which its slack looks fine. Index 0 in the report
/// covers the candidate and its rescalings; `i >= 1` is the i-th draw.
pub fn minty_check(
    prob: &QviProblem,
    a: &CellField,
    u: &NodeField,
    samples: usize,
    seed: u64,
) -> Result<MintyReport> {
    prob.check_coefficient(a)?;
    if u.grid() != prob.grid() {
        return Err(Error::GridMismatch("candidate lives on a different grid".into()));
    }
    let r = radii_of(prob, u)?;
    let self_feasible = check_feasible(u, &r, 0.0)?.feasible;
    let phi_u = phi_integral(prob, u)?;

    let slack = |v: &NodeField| -> Result<f64> {
        let d = v.sub(u);
        let phi_v = phi_integral(prob, v)?;
        if phi_v.is_infinite() || phi_u.is_infinite() {
            return Ok(f64::INFINITY);
        }
        Ok(pairing(prob, a, v, &d)? + phi_v - phi_u - dual_pairing(prob.m(), &d)?)
    };

    let mut min_slack = f64::INFINITY;
    let mut min_scaled = f64::INFINITY;
    let mut worst = 0usize;

    if self_feasible {
        // slack at v = u is exactly zero; seed the minimum with it
        min_slack = 0.0;
        min_scaled = 0.0;
    }

    for t in [0.01, 0.1, 0.5] {
        for sgn in [1.0, -1.0] {
            let v = u.scale(1.0 + sgn * t);
            if !check_feasible(&v, &r, 0.0)?.feasible {
                continue;
            }
            let s = slack(&v)?;
            let scaled = s / (1.0 + v.sub(u).norm_l2h());
            if scaled < min_scaled {
                min_scaled = scaled;
                min_slack = s;
                worst = 0;
            }
        }
    }

    let segment = [0.01, 0.1, 1.0];
    for (i, v) in sample_feasible(&r, seed, samples)?.iter().enumerate() {
        let probes: &[f64] = if self_feasible { &segment } else { &segment[2..] };
        for &t in probes {
            let vt = if t == 1.0 { v.clone() } else { u.add_scaled(t, &v.sub(u)) };
            let s = slack(&vt)?;
            let scaled = s / (1.0 + vt.sub(u).norm_l2h());
            if scaled < min_scaled {
                min_scaled = scaled;
                min_slack = s;
                worst = i + 1;
            }
        }
    }

    Ok(MintyReport { samples, min_slack, min_scaled_slack: min_scaled, worst_v_index: worst, self_feasible })
}
