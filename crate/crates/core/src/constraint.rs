//! Cellwise gradient-ball constraints and the state-dependent radii
//! that make the problem quasi-variational.
//!
//! The constraint set for a state w is
//! `K(w) = { v : |g_c(v)| <= c(avg of w at the cell corners) for all c }`,
//! with boundary corners contributing zero to the average.

use crate::error::{Error, Result};
use crate::grid::{gradient, Grid, NodeField, VectorField};
use crate::problem::QviProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One positive radius per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusField {
    grid: Grid,
    values: Vec<f64>,
}

impl RadiusField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::ShapeMismatch(format!(
                "radius field needs {} values, got {}",
                grid.cell_count(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "radius at cell {i} must be positive and finite, got {}",
                values[i]
            )));
        }
        Ok(RadiusField { grid, values })
    }

    pub fn constant(grid: Grid, r: f64) -> Result<Self> {
        Self::new(grid, vec![r; grid.cell_count()])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }
}

/// Average of the state at the corners of one cell; boundary corners
/// count as zero.
fn cell_state_average(w: &NodeField, cell: usize) -> f64 {
    let grid = w.grid();
    let n = grid.n();
    match grid.dim() {
        1 => {
            let left = if cell == 0 { 0.0 } else { w.values()[cell - 1] };
            let right = if cell == n - 1 { 0.0 } else { w.values()[cell] };
            0.5 * (left + right)
        }
        _ => {
            let ix = cell % n;
            let iy = cell / n;
            let val = |kx: usize, ky: usize| -> f64 {
                if kx == 0 || ky == 0 || kx == n || ky == n {
                    0.0
                } else {
                    w.values()[(ky - 1) * (n - 1) + (kx - 1)]
                }
            };
            0.25 * (val(ix, iy) + val(ix + 1, iy) + val(ix, iy + 1) + val(ix + 1, iy + 1))
        }
    }
}

/// Radii of the constraint set K(w): the radius map applied to the
/// cell-averaged state.
pub fn radii_of(prob: &QviProblem, w: &NodeField) -> Result<RadiusField> {
    if w.grid() != prob.grid() {
        return Err(Error::GridMismatch("state lives on a different grid".into()));
    }
    let grid = prob.grid();
    let values = (0..grid.cell_count())
        .map(|c| prob.constraint().radius(cell_state_average(w, c)))
        .collect();
    RadiusField::new(grid, values)
}

/// Outcome of a feasibility check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// `max_c (|g_c(v)| - r_c)`; negative when strictly inside.
    pub max_violation: f64,
}

/// Checks `|g_c(v)| <= r_c + tol` cellwise.
pub fn check_feasible(v: &NodeField, r: &RadiusField, tol: f64) -> Result<Feasibility> {
    if v.grid() != r.grid() {
        return Err(Error::GridMismatch("feasibility check got mismatched grids".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be >= 0, got {tol}")));
    }
    let g = gradient(v);
    let mut max_violation = f64::NEG_INFINITY;
    for c in 0..r.values.len() {
        max_violation = max_violation.max(g.cell_norm(c) - r.values[c]);
    }
    Ok(Feasibility { feasible: max_violation <= tol, max_violation })
}

/// Projects a gradient-like field into the cellwise balls: cells inside
/// their ball are untouched, cells outside are scaled back radially.
pub fn project_gradient(w: &VectorField, r: &RadiusField) -> Result<VectorField> {
    if w.grid() != r.grid() {
        return Err(Error::GridMismatch("projection got mismatched grids".into()));
    }
    let mut values = w.values().to_vec();
    for c in 0..values.len() {
        let s = w.cell_norm(c);
        let rc = r.values[c];
        if s > rc {
            let scale = rc / s;
            let mut v = [values[c][0] * scale, values[c][1] * scale];
            // the scaled point can round to just outside the ball;
            // shrink by ulps until |v| <= r holds exactly, so a second
            // projection is a bitwise no-op
            while (v[0] * v[0] + v[1] * v[1]).sqrt() > rc {
                v = [v[0] * (1.0 - f64::EPSILON), v[1] * (1.0 - f64::EPSILON)];
            }
            values[c] = v;
        }
    }
    VectorField::new(w.grid(), values)
}

/// Draws `count` random node fields guaranteed feasible for `r`:
/// each draw is i.i.d. uniform in [-1, 1] per node, then scaled by
/// `s = min(1, min_c r_c / (|g_c(q)| + 1e-14))` so every cell ball
/// holds. Same seed, same fields.
pub fn sample_feasible(r: &RadiusField, seed: u64, count: usize) -> Result<Vec<NodeField>> {
    let grid = r.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let q = NodeField::new(
            grid,
            (0..grid.interior_node_count()).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
        )?;
        let g = gradient(&q);
        let mut scale = 1.0f64;
        for c in 0..r.values.len() {
            scale = scale.min(r.values[c] / (g.cell_norm(c) + 1e-14));
        }
        out.push(q.scale(scale));
    }
    Ok(out)
}
