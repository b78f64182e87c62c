//! Inner convex solver: minimizes the p-power energy over a fixed
//! cellwise gradient-ball set by operator splitting.
//!
//! Splitting layout: two consensus copies, `g` for the gradient (it
//! absorbs the p-power term and the ball indicator, solved cellwise by
//! a scalar power prox followed by a radius clamp) and `w` for the
//! nodewise convex term (solved by its exact prox). The u-subproblem is
//! then a constant SPD system `(D^T D + I) u = rhs`, factored once per
//! grid in 1D and solved matrix-free by conjugate gradients in 2D.
//!
//! Convergence is certified by residuals recomputed from scratch in
//! [`kkt_residual`]: consensus gaps, the multiplier balance
//! `D^T y_g + y_w = m`, and natural-map residuals for both inclusions.
//! The penalty parameter self-tunes by balancing primal against
//! stationarity residuals; the relaxation factor lives in [1, 2).

use crate::constraint::{check_feasible, RadiusField};
use crate::error::{Error, Result};
use crate::grid::{gradient, gradient_adjoint, Grid, CellField, NodeField, VectorField};
use crate::problem::{validate, QviProblem};

/// Options for [`solve_vi`].
#[derive(Debug, Clone, PartialEq)]
pub struct InnerOptions {
    pub max_iter: usize,
    /// Residual tolerance for all three convergence measures.
    pub tol_kkt: f64,
    /// Initial augmentation penalty; self-tunes geometrically.
    pub penalty: f64,
    /// Over-relaxation factor in [1, 2).
    pub over_relaxation: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions { max_iter: 20_000, tol_kkt: 1e-9, penalty: 1.0, over_relaxation: 1.0 }
    }
}

impl InnerOptions {
    fn check(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.tol_kkt > 0.0) || !self.tol_kkt.is_finite() {
            return Err(Error::InvalidConfig(format!("tol_kkt must be positive, got {}", self.tol_kkt)));
        }
        if !(self.penalty > 0.0) || !self.penalty.is_finite() {
            return Err(Error::InvalidConfig(format!("penalty must be positive, got {}", self.penalty)));
        }
        if !(1.0..2.0).contains(&self.over_relaxation) {
            return Err(Error::InvalidConfig(format!(
                "over_relaxation must lie in [1, 2), got {}",
                self.over_relaxation
            )));
        }
        Ok(())
    }
}

/// Split variables and (unscaled) multipliers, enough to re-derive
/// every optimality residual without solver internals.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitState {
    /// Consensus copy of the gradient.
    pub g: VectorField,
    /// Consensus copy of the state (carries the nodewise convex term).
    pub w: NodeField,
    /// Multiplier for `Du = g`.
    pub dual_g: VectorField,
    /// Multiplier for `u = w`.
    pub dual_w: NodeField,
}

/// Residuals of one candidate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub iterations: usize,
    /// Largest consensus gap, `max(|Du - g|, |u - w|)` in discrete L2.
    pub primal_residual: f64,
    /// Largest of: multiplier balance `|D^T y_g + y_w - m|` and the
    /// natural-map residuals of the two inclusions.
    pub stationarity_residual: f64,
    /// `max_c (|g_c(u)| - r_c)`; negative when strictly feasible.
    pub feasibility_violation: f64,
    pub converged: bool,
}

/// Solver output: the state, its certificate, and the split state the
/// certificate was computed from.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub u: NodeField,
    pub report: KktReport,
    pub split: SplitState,
}

// ---------------------------------------------------------------------
// scalar power prox

/// Solves `a t^(p-1) + rho (t - s) = 0` for `t in [0, s]`, `s > 0`.
/// This is the radial prox of `(a/p) |.|^p` with step `1/rho`.
fn power_prox_root(a: f64, rho: f64, s: f64, p: f64) -> f64 {
    if p == 2.0 {
        return rho * s / (a + rho);
    }
    let f = |t: f64| a * t.powf(p - 1.0) + rho * (t - s);
    let fp = |t: f64| a * (p - 1.0) * t.powf(p - 2.0) + rho;
    let mut lo = 0.0f64;
    let mut hi = s;
    // start from the root of the linearized power term at s
    let mut t = rho * s / (rho + a * s.powf(p - 2.0));
    let tol_f = 1e-15 * (a * s.powf(p - 1.0) + rho * s);
    for _ in 0..200 {
        let ft = f(t);
        if ft.abs() <= tol_f {
            return t;
        }
        if ft > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let d = fp(t);
        let mut next = t - ft / d;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) <= 1e-16 * s {
            return 0.5 * (lo + hi);
        }
        t = next;
    }
    t
}

// ---------------------------------------------------------------------
// linear solves for (D^T D + I) u = rhs

/// Prefactored tridiagonal solver for the 1D u-subproblem.
struct Tridiag {
    off: f64,
    cp: Vec<f64>,
    den: Vec<f64>,
}

impl Tridiag {
    fn new(grid: Grid) -> Self {
        let nn = grid.interior_node_count();
        let h = grid.h();
        let diag = 2.0 / (h * h) + 1.0;
        let off = -1.0 / (h * h);
        let mut cp = vec![0.0; nn];
        let mut den = vec![0.0; nn];
        den[0] = diag;
        cp[0] = off / diag;
        for i in 1..nn {
            den[i] = diag - off * cp[i - 1];
            cp[i] = off / den[i];
        }
        Tridiag { off, cp, den }
    }

    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let nn = rhs.len();
        let mut d = vec![0.0; nn];
        d[0] = rhs[0] / self.den[0];
        for i in 1..nn {
            d[i] = (rhs[i] - self.off * d[i - 1]) / self.den[i];
        }
        out[nn - 1] = d[nn - 1];
        for i in (0..nn - 1).rev() {
            out[i] = d[i] - self.cp[i] * out[i + 1];
        }
    }
}

fn apply_system(u: &NodeField) -> NodeField {
    gradient_adjoint(&gradient(u)).add_scaled(1.0, u)
}

/// Conjugate gradients on the constant SPD system, warm-started.
fn cg_solve(grid: Grid, rhs: &NodeField, x: &mut NodeField) {
    let nn = grid.interior_node_count();
    let dot = |a: &NodeField, b: &NodeField| -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
    };
    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        for v in x.values_mut() {
            *v = 0.0;
        }
        return;
    }
    let tol = 1e-14 * rhs_norm;
    let mut r = rhs.sub(&apply_system(x));
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= tol {
        return;
    }
    let mut p = r.clone();
    for _ in 0..(10 * nn + 100) {
        let ap = apply_system(&p);
        let alpha = rr / dot(&p, &ap);
        *x = x.add_scaled(alpha, &p);
        r = r.add_scaled(-alpha, &ap);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol {
            return;
        }
        p = r.add_scaled(rr_new / rr, &p);
        rr = rr_new;
    }
}

// ---------------------------------------------------------------------
// residuals

fn ball_project_cell(v: [f64; 2], r: f64) -> [f64; 2] {
    let s = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if s > r {
        let c = r / s;
        [v[0] * c, v[1] * c]
    } else {
        v
    }
}

/// Recomputes every optimality residual of `(u, split)` from scratch.
/// Nothing from the solver loop is trusted here: consensus gaps, the
/// multiplier balance and both inclusion residuals are evaluated
/// directly from the supplied fields.
pub fn kkt_residual(
    prob: &QviProblem,
    a: &CellField,
    r: &RadiusField,
    u: &NodeField,
    split: &SplitState,
    tol_kkt: f64,
) -> Result<KktReport> {
    let grid = prob.grid();
    if a.grid() != grid || r.grid() != grid || u.grid() != grid || split.g.grid() != grid {
        return Err(Error::GridMismatch("kkt_residual got mismatched grids".into()));
    }
    let p = prob.p();
    let vol = grid.cell_volume();
    let du = gradient(u);

    let primal_g = du.sub(&split.g).norm_l2h();
    let primal_w = u.sub(&split.w).norm_l2h();
    let primal = primal_g.max(primal_w);

    // multiplier balance: D^T y_g + y_w - m = 0
    let balance = gradient_adjoint(&split.dual_g)
        .add_scaled(1.0, &split.dual_w)
        .add_scaled(-1.0, prob.m());
    let stat_balance = balance.norm_l2h();

    // natural map of the gradient inclusion, cell by cell
    let mut gnat = 0.0;
    for c in 0..grid.cell_count() {
        let g = split.g.values()[c];
        let y = split.dual_g.values()[c];
        let s = (g[0] * g[0] + g[1] * g[1]).sqrt();
        let base = if s == 0.0 {
            [0.0, 0.0]
        } else {
            let w = a.values()[c] * s.powf(p - 2.0);
            [w * g[0], w * g[1]]
        };
        let z = [g[0] + y[0] - base[0], g[1] + y[1] - base[1]];
        let pz = ball_project_cell(z, r.values()[c]);
        let d = [g[0] - pz[0], g[1] - pz[1]];
        gnat += (d[0] * d[0] + d[1] * d[1]) * vol;
    }
    let gnat = gnat.sqrt();

    // natural map of the nodewise inclusion
    let mut wnat = 0.0;
    for i in 0..grid.interior_node_count() {
        let w = split.w.values()[i];
        let y = split.dual_w.values()[i];
        let d = w - prob.phi().prox(w + y, 1.0);
        wnat += d * d * vol;
    }
    let wnat = wnat.sqrt();

    let stationarity = stat_balance.max(gnat).max(wnat);
    let feas = check_feasible(u, r, 0.0)?.max_violation;
    let converged = primal <= tol_kkt && stationarity <= tol_kkt && feas <= tol_kkt;
    Ok(KktReport {
        iterations: 0,
        primal_residual: primal,
        stationarity_residual: stationarity,
        feasibility_violation: feas,
        converged,
    })
}

// ---------------------------------------------------------------------
// the splitting loop

const CHECK_EVERY: usize = 5;
const RHO_MIN: f64 = 1e-8;
const RHO_MAX: f64 = 1e8;

/// Solves the fixed-constraint problem: minimize
/// `sum_c (a_c/p)|g_c(u)|^p h^dim + phi-term - <m, u>` subject to
/// `|g_c(u)| <= r_c` per cell. Returns the best iterate found; check
/// `report.converged` before trusting it to tolerance.
pub fn solve_vi(
    prob: &QviProblem,
    a: &CellField,
    r: &RadiusField,
    opts: &InnerOptions,
    warm_start: Option<&NodeField>,
) -> Result<InnerSolution> {
    opts.check()?;
    if !validate(prob).all_passed() {
        return Err(Error::InvalidConfig(
            "problem fails validation; run validate() for the check list".into(),
        ));
    }
    prob.check_coefficient(a)?;
    let grid = prob.grid();
    if r.grid() != grid {
        return Err(Error::GridMismatch("radius field lives on a different grid".into()));
    }
    if let Some(ws) = warm_start {
        if ws.grid() != grid {
            return Err(Error::GridMismatch("warm start lives on a different grid".into()));
        }
    }

    let p = prob.p();
    let alpha = opts.over_relaxation;
    let mut rho = opts.penalty;
    let tridiag = if grid.dim() == 1 { Some(Tridiag::new(grid)) } else { None };

    let mut u = warm_start.cloned().unwrap_or_else(|| NodeField::zeros(grid));
    let mut g = crate::constraint::project_gradient(&gradient(&u), r)?;
    let mut w = u.clone();
    let mut dual_g = VectorField::zeros(grid);
    let mut dual_w = NodeField::zeros(grid);

    let snapshot = |g: &VectorField, w: &NodeField, yg: &VectorField, yw: &NodeField| {
        SplitState { g: g.clone(), w: w.clone(), dual_g: yg.clone(), dual_w: yw.clone() }
    };

    // iteration-0 check so exact warm starts return untouched
    let mut report = kkt_residual(prob, a, r, &u, &snapshot(&g, &w, &dual_g, &dual_w), opts.tol_kkt)?;
    if report.converged {
        let split = snapshot(&g, &w, &dual_g, &dual_w);
        return Ok(InnerSolution { u, report, split });
    }
    let mut best_score = f64::INFINITY;
    let mut best: Option<(NodeField, KktReport, SplitState)> = None;

    for it in 1..=opts.max_iter {
        // u-update: (D^T D + I) u = m/rho + D^T (g - y_g/rho) + (w - y_w/rho)
        let rhs = prob
            .m()
            .scale(1.0 / rho)
            .add_scaled(1.0, &gradient_adjoint(&g.add_scaled(-1.0 / rho, &dual_g)))
            .add_scaled(1.0, &w.add_scaled(-1.0 / rho, &dual_w));
        match &tridiag {
            Some(t) => {
                let mut out = vec![0.0; rhs.len()];
                t.solve(rhs.values(), &mut out);
                u = NodeField::new(grid, out)?;
            }
            None => cg_solve(grid, &rhs, &mut u),
        }
        let du = gradient(&u);

        // relaxed consensus points
        let du_r = du.scale(alpha).add_scaled(1.0 - alpha, &g);
        let u_r = u.scale(alpha).add_scaled(1.0 - alpha, &w);

        // g-update: power prox then radius clamp, cell by cell
        let mut g_new = vec![[0.0; 2]; grid.cell_count()];
        for c in 0..grid.cell_count() {
            let q = [
                du_r.values()[c][0] + dual_g.values()[c][0] / rho,
                du_r.values()[c][1] + dual_g.values()[c][1] / rho,
            ];
            let s = (q[0] * q[0] + q[1] * q[1]).sqrt();
            if s == 0.0 {
                continue;
            }
            let t = power_prox_root(a.values()[c], rho, s, p).min(r.values()[c]);
            let c_scale = t / s;
            g_new[c] = [q[0] * c_scale, q[1] * c_scale];
        }
        g = VectorField::new(grid, g_new)?;

        // w-update: exact nodewise prox with step 1/rho
        let mut w_new = vec![0.0; grid.interior_node_count()];
        for i in 0..w_new.len() {
            let s = u_r.values()[i] + dual_w.values()[i] / rho;
            w_new[i] = prob.phi().prox(s, 1.0 / rho);
        }
        w = NodeField::new(grid, w_new)?;

        // multiplier update
        dual_g = dual_g.add_scaled(rho, &du_r.sub(&g));
        dual_w = dual_w.add_scaled(rho, &u_r.sub(&w));

        if it % CHECK_EVERY == 0 || it == opts.max_iter {
            let split = snapshot(&g, &w, &dual_g, &dual_w);
            report = kkt_residual(prob, a, r, &u, &split, opts.tol_kkt)?;
            report.iterations = it;
            let score = report
                .primal_residual
                .max(report.stationarity_residual)
                .max(report.feasibility_violation.max(0.0));
            if score < best_score {
                best_score = score;
                best = Some((u.clone(), report, split));
            }
            if report.converged {
                break;
            }
            // keep the two residual families within a decade of each other
            if report.primal_residual > 10.0 * report.stationarity_residual {
                rho = (rho * 2.0).min(RHO_MAX);
            } else if report.stationarity_residual > 10.0 * report.primal_residual {
                rho = (rho / 2.0).max(RHO_MIN);
            }
        }
    }

    let (u, report, split) = best.expect("at least one residual check ran");
    Ok(InnerSolution { u, report, split })
}
