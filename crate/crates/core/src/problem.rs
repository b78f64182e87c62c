//! Problem data: the convex nodewise term, the state-dependent
//! constraint radius map, and the assembled problem instance.

use crate::error::{Error, Result};
use crate::grid::{CellField, Grid, NodeField};

/// Convex, proper, lower semicontinuous nodewise term.
///
/// Each variant ships its exact proximal map so solvers never need to
/// differentiate it.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiSpec {
    /// Identically zero.
    Zero,
    /// `lambda * |s|` with `lambda >= 0`.
    Abs { lambda: f64 },
    /// Indicator of `[lo, hi]` with `lo <= 0 <= hi`.
    Box { lo: f64, hi: f64 },
}

impl PhiSpec {
    pub fn zero() -> Self {
        PhiSpec::Zero
    }

    pub fn abs(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParameter(format!("abs weight must be >= 0, got {lambda}")));
        }
        Ok(PhiSpec::Abs { lambda })
    }

    pub fn boxed(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > 0.0 || hi < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "box must satisfy lo <= 0 <= hi, got [{lo}, {hi}]"
            )));
        }
        Ok(PhiSpec::Box { lo, hi })
    }

    /// Pointwise value; `+inf` outside the box domain.
    pub fn value(&self, s: f64) -> f64 {
        match self {
            PhiSpec::Zero => 0.0,
            PhiSpec::Abs { lambda } => lambda * s.abs(),
            PhiSpec::Box { lo, hi } => {
                if s < *lo || s > *hi {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// Proximal map `argmin_r phi(r) + (r - s)^2 / (2 t)` for `t > 0`.
    pub fn prox(&self, s: f64, t: f64) -> f64 {
        debug_assert!(t > 0.0);
        match self {
            PhiSpec::Zero => s,
            PhiSpec::Abs { lambda } => {
                let shift = lambda * t;
                if s > shift {
                    s - shift
                } else if s < -shift {
                    s + shift
                } else {
                    0.0
                }
            }
            PhiSpec::Box { lo, hi } => s.clamp(*lo, *hi),
        }
    }
}

/// State-dependent gradient bound `c`: the cellwise constraint is
/// `|grad u| <= c(state)` where the state is a local average of u.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSpec {
    /// Constant radius `r` with `0 < r <= c0`.
    Constant { r: f64, c0: f64 },
    /// `clamp(alpha + beta*|s|, floor, c0)` with `0 < floor <= c0`.
    AffineClamped { alpha: f64, beta: f64, floor: f64, c0: f64 },
}

impl ConstraintSpec {
    pub fn constant(r: f64, c0: f64) -> Result<Self> {
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::InvalidParameter(format!("c0 must be positive, got {c0}")));
        }
        if !(r > 0.0) || r > c0 {
            return Err(Error::InvalidParameter(format!("need 0 < r <= c0, got r={r}, c0={c0}")));
        }
        Ok(ConstraintSpec::Constant { r, c0 })
    }

    pub fn affine_clamped(alpha: f64, beta: f64, floor: f64, c0: f64) -> Result<Self> {
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::InvalidParameter(format!("c0 must be positive, got {c0}")));
        }
        if !(floor > 0.0) || floor > c0 {
            return Err(Error::InvalidParameter(format!(
                "need 0 < floor <= c0, got floor={floor}, c0={c0}"
            )));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter("alpha and beta must be finite".into()));
        }
        Ok(ConstraintSpec::AffineClamped { alpha, beta, floor, c0 })
    }

    /// Radius for a scalar state value.
    pub fn radius(&self, s: f64) -> f64 {
        match self {
            ConstraintSpec::Constant { r, .. } => *r,
            ConstraintSpec::AffineClamped { alpha, beta, floor, c0 } => {
                (alpha + beta * s.abs()).clamp(*floor, *c0)
            }
        }
    }

    /// Uniform radius cap.
    pub fn c0(&self) -> f64 {
        match self {
            ConstraintSpec::Constant { c0, .. } => *c0,
            ConstraintSpec::AffineClamped { c0, .. } => *c0,
        }
    }

    /// Lipschitz constant of `s -> radius(s)`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            ConstraintSpec::Constant { .. } => 0.0,
            ConstraintSpec::AffineClamped { beta, .. } => beta.abs(),
        }
    }
}

/// A discretized instance: grid, power `p`, source `m`, convex term,
/// and the implicit constraint map.
#[derive(Debug, Clone, PartialEq)]
pub struct QviProblem {
    grid: Grid,
    p: f64,
    m: NodeField,
    phi: PhiSpec,
    constraint: ConstraintSpec,
}

impl QviProblem {
    /// Assembles an instance. Structural checks happen here; the
    /// analytic requirements (p > 1, radius bounds, domain fit) are
    /// reported by [`validate`] so ill-posed instances can still be
    /// inspected.
    pub fn new(
        grid: Grid,
        p: f64,
        m: NodeField,
        phi: PhiSpec,
        constraint: ConstraintSpec,
    ) -> Result<Self> {
        if m.grid() != grid {
            return Err(Error::GridMismatch("source term lives on a different grid".into()));
        }
        if !p.is_finite() || p <= 0.0 {
            return Err(Error::InvalidParameter(format!("p must be positive and finite, got {p}")));
        }
        Ok(QviProblem { grid, p, m, phi, constraint })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn m(&self) -> &NodeField {
        &self.m
    }

    pub fn phi(&self) -> &PhiSpec {
        &self.phi
    }

    pub fn constraint(&self) -> &ConstraintSpec {
        &self.constraint
    }

    /// Positivity check for a coefficient field on this grid.
    pub fn check_coefficient(&self, a: &CellField) -> Result<()> {
        if a.grid() != self.grid {
            return Err(Error::GridMismatch("coefficient lives on a different grid".into()));
        }
        if a.min() <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "coefficient must be positive cellwise, min is {}",
                a.min()
            )));
        }
        Ok(())
    }
}

/// One named validation check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of [`validate`].
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Checks the analytic hypotheses on an assembled instance:
/// `p > 1`, the radius map staying inside `(0, c0]` over a wide state
/// range, and (for box phi) the reachable states staying strictly
/// inside the box.
pub fn validate(prob: &QviProblem) -> ValidationReport {
    let mut checks = Vec::new();

    let p_ok = prob.p > 1.0;
    checks.push(CheckResult {
        name: "p_exceeds_one",
        passed: p_ok,
        detail: format!("p = {}", prob.p),
    });

    // Sample the radius map on s in [-10, 10].
    let c0 = prob.constraint.c0();
    let mut radius_ok = true;
    let mut bad = String::new();
    for k in 0..=1000 {
        let s = -10.0 + 20.0 * k as f64 / 1000.0;
        let r = prob.constraint.radius(s);
        if !(r > 0.0) || r > c0 {
            radius_ok = false;
            bad = format!("radius({s}) = {r} outside (0, {c0}]");
            break;
        }
    }
    checks.push(CheckResult {
        name: "radius_in_range",
        passed: radius_ok,
        detail: if radius_ok { format!("radius stays in (0, {c0}] on [-10, 10]") } else { bad },
    });

    // Gradient bound c0 on the unit domain caps |u| by c0 * 1, so the
    // reachable states must sit strictly inside the box domain.
    let (domain_ok, detail) = match prob.phi {
        PhiSpec::Box { lo, hi } => {
            let ok = lo < -c0 && c0 < hi;
            (ok, format!("need [-{c0}, {c0}] inside ({lo}, {hi})"))
        }
        _ => (true, "phi is finite everywhere".to_string()),
    };
    checks.push(CheckResult { name: "states_inside_phi_domain", passed: domain_ok, detail });

    ValidationReport { checks }
}

/// Integral of phi over a node field: `sum_i phi(u_i) h^dim`.
/// Returns `+inf` as soon as one node leaves the domain.
pub fn phi_integral(prob: &QviProblem, u: &NodeField) -> Result<f64> {
    if u.grid() != prob.grid {
        return Err(Error::GridMismatch("phi_integral got a field on a different grid".into()));
    }
    let vol = prob.grid.cell_volume();
    let mut total = 0.0;
    for &s in u.values() {
        let v = prob.phi.value(s);
        if v.is_infinite() {
            return Ok(f64::INFINITY);
        }
        total += v * vol;
    }
    Ok(total)
}
