//! The coefficient-weighted p-power gradient operator.
//!
//! `pairing(prob, a, u, v)` evaluates the duality product
//! `sum_c a_c |g_c(u)|^(p-2) (g_c(u) . g_c(v)) h^dim`, with the
//! convention that a zero gradient contributes zero even for p < 2.
//! `energy` is its convex potential, so the inner solver can run as a
//! plain convex minimization and every derivative-like quantity can be
//! cross-checked by finite differences.

use crate::error::{Error, Result};
use crate::grid::{dual_pairing, gradient, CellField, NodeField, VectorField};
use crate::problem::{phi_integral, QviProblem};

/// Pairing with an arbitrary (possibly signed) cellwise weight. The
/// operator is linear in the weight, so signed weights are meaningful
/// for difference estimates even though solve paths require a > 0.
fn weighted_pairing(p: f64, b: &CellField, gu: &VectorField, gv: &VectorField) -> f64 {
    let vol = b.grid().cell_volume();
    let mut total = 0.0;
    for c in 0..b.values().len() {
        let s = gu.cell_norm(c);
        if s == 0.0 {
            continue;
        }
        let dot = gu.values()[c][0] * gv.values()[c][0] + gu.values()[c][1] * gv.values()[c][1];
        total += b.values()[c] * s.powf(p - 2.0) * dot * vol;
    }
    total
}

fn check_grids(prob: &QviProblem, a: &CellField, fields: &[&NodeField]) -> Result<()> {
    if a.grid() != prob.grid() {
        return Err(Error::GridMismatch("coefficient lives on a different grid".into()));
    }
    for f in fields {
        if f.grid() != prob.grid() {
            return Err(Error::GridMismatch("field lives on a different grid".into()));
        }
    }
    Ok(())
}

/// Duality product of the operator at `u` against `v`.
pub fn pairing(prob: &QviProblem, a: &CellField, u: &NodeField, v: &NodeField) -> Result<f64> {
    check_grids(prob, a, &[u, v])?;
    prob.check_coefficient(a)?;
    Ok(weighted_pairing(prob.p(), a, &gradient(u), &gradient(v)))
}

/// Convex potential
/// `sum_c (a_c/p) |g_c(u)|^p h^dim + phi_integral(u) - <m, u>`.
pub fn energy(prob: &QviProblem, a: &CellField, u: &NodeField) -> Result<f64> {
    check_grids(prob, a, &[u])?;
    prob.check_coefficient(a)?;
    let p = prob.p();
    let vol = prob.grid().cell_volume();
    let gu = gradient(u);
    let mut total = 0.0;
    for c in 0..a.values().len() {
        total += a.values()[c] / p * gu.cell_norm(c).powf(p) * vol;
    }
    let phi = phi_integral(prob, u)?;
    if phi.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(total + phi - dual_pairing(prob.m(), u)?)
}

/// Monotonicity gap `<T(a,u) - T(a,v), u - v>`; nonnegative up to
/// rounding for every positive coefficient.
pub fn monotone_gap(prob: &QviProblem, a: &CellField, u: &NodeField, v: &NodeField) -> Result<f64> {
    check_grids(prob, a, &[u, v])?;
    prob.check_coefficient(a)?;
    let p = prob.p();
    let gu = gradient(u);
    let gv = gradient(v);
    let d = gu.sub(&gv);
    Ok(weighted_pairing(p, a, &gu, &d) - weighted_pairing(p, a, &gv, &d))
}

/// Additivity defect in the coefficient:
/// `|<T(a+b,u),v> - <T(a,u),v> - <T(b,u),v>|`. Zero up to rounding.
pub fn linearity_defect(
    prob: &QviProblem,
    a: &CellField,
    b: &CellField,
    u: &NodeField,
    v: &NodeField,
) -> Result<f64> {
    check_grids(prob, a, &[u, v])?;
    if b.grid() != prob.grid() {
        return Err(Error::GridMismatch("second coefficient lives on a different grid".into()));
    }
    let p = prob.p();
    let gu = gradient(u);
    let gv = gradient(v);
    let sum = CellField::new(
        a.grid(),
        a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect(),
    )?;
    let lhs = weighted_pairing(p, &sum, &gu, &gv);
    let rhs = weighted_pairing(p, a, &gu, &gv) + weighted_pairing(p, b, &gu, &gv);
    Ok((lhs - rhs).abs())
}

/// Slack of the Hoelder estimate for coefficient differences:
/// with `b = a1 - a2`,
/// `rhs - <T(b,u),v>` where
/// `rhs = (sum |b| |g(u)|^p h)^((p-1)/p) * (sum |b| |g(v)|^p h)^(1/p)`.
/// Nonnegative up to rounding.
pub fn hoelder_gap(
    prob: &QviProblem,
    a1: &CellField,
    a2: &CellField,
    u: &NodeField,
    v: &NodeField,
) -> Result<f64> {
    check_grids(prob, a1, &[u, v])?;
    if a2.grid() != prob.grid() {
        return Err(Error::GridMismatch("second coefficient lives on a different grid".into()));
    }
    let p = prob.p();
    let grid = prob.grid();
    let vol = grid.cell_volume();
    let diff = CellField::new(
        grid,
        a1.values().iter().zip(a2.values()).map(|(x, y)| x - y).collect(),
    )?;
    let gu = gradient(u);
    let gv = gradient(v);
    let lhs = weighted_pairing(p, &diff, &gu, &gv);
    let mut wu = 0.0;
    let mut wv = 0.0;
    for c in 0..diff.values().len() {
        let w = diff.values()[c].abs() * vol;
        wu += w * gu.cell_norm(c).powf(p);
        wv += w * gv.cell_norm(c).powf(p);
    }
    let rhs = wu.powf((p - 1.0) / p) * wv.powf(1.0 / p);
    Ok(rhs - lhs)
}

/// Operator-norm style bound used by audits:
/// `max(a) * |g(u)|_p^(p-1) * |g(v)|_p`.
pub fn pairing_bound(prob: &QviProblem, a: &CellField, u: &NodeField, v: &NodeField) -> Result<f64> {
    check_grids(prob, a, &[u, v])?;
    let p = prob.p();
    let nu = gradient(u).lp_norm(p)?;
    let nv = gradient(v).lp_norm(p)?;
    Ok(a.max() * nu.powf(p - 1.0) * nv)
}
