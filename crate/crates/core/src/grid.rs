//! Uniform grids on the unit interval / unit square and the discrete
//! fields living on them.
//!
//! The domain is (0,1)^dim split into `n` cells per axis, `h = 1/n`.
//! Scalar unknowns live on interior nodes (homogeneous Dirichlet data,
//! so boundary nodes are implicit zeros), coefficients live on cells,
//! and gradients are per-cell d-vectors:
//!
//! * 1D: `(Du)_i = (U_{i+1} - U_i)/h` with `U_0 = U_n = 0`.
//! * 2D: the gradient of the bilinear nodal interpolant evaluated at
//!   the cell center, i.e. corner-averaged differences over `h`.
//!
//! All reductions run in a fixed index order so results are bitwise
//! reproducible across runs.

use crate::error::{Error, Result};

/// Uniform grid over (0,1)^dim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    /// Builds a grid with `n >= 2` cells per axis, `dim` in {1, 2}.
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidConfig(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 2 {
            return Err(Error::InvalidConfig(format!("n must be at least 2, got {n}")));
        }
        Ok(Grid { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh width `1/n`.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total number of cells, `n^dim`.
    pub fn cell_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Number of interior nodes, `(n-1)^dim`.
    pub fn interior_node_count(&self) -> usize {
        (self.n - 1).pow(self.dim as u32)
    }

    /// Cell volume `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} entry {i} is not finite")));
    }
    Ok(())
}

/// Scalar values on interior nodes (boundary values are implicit zeros).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeField {
    grid: Grid,
    values: Vec<f64>,
}

/// Scalar values on cells (coefficients, radii).
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Grid,
    values: Vec<f64>,
}

/// A d-vector per cell. The second component is kept at zero in 1D so
/// the Euclidean cell norm reads the same in both dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    values: Vec<[f64; 2]>,
}

impl NodeField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior_node_count() {
            return Err(Error::ShapeMismatch(format!(
                "node field needs {} values, got {}",
                grid.interior_node_count(),
                values.len()
            )));
        }
        check_finite(&values, "node field")?;
        Ok(NodeField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        NodeField { grid, values: vec![0.0; grid.interior_node_count()] }
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.interior_node_count()])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self + c * other`, entrywise.
    pub fn add_scaled(&self, c: f64, other: &NodeField) -> NodeField {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        NodeField { grid: self.grid, values }
    }

    pub fn sub(&self, other: &NodeField) -> NodeField {
        self.add_scaled(-1.0, other)
    }

    pub fn scale(&self, c: f64) -> NodeField {
        NodeField { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    /// Discrete L2 norm, `sqrt(sum u_i^2 h^dim)`.
    pub fn norm_l2h(&self) -> f64 {
        let vol = self.grid.cell_volume();
        self.values.iter().map(|v| v * v * vol).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl CellField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::ShapeMismatch(format!(
                "cell field needs {} values, got {}",
                grid.cell_count(),
                values.len()
            )));
        }
        check_finite(&values, "cell field")?;
        Ok(CellField { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.cell_count()])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    pub fn scale(&self, c: f64) -> CellField {
        CellField { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// Discrete L1 norm, `sum |a_c| h^dim`.
    pub fn norm_l1h(&self) -> f64 {
        let vol = self.grid.cell_volume();
        self.values.iter().map(|v| v.abs() * vol).sum()
    }
}

impl VectorField {
    pub fn new(grid: Grid, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::ShapeMismatch(format!(
                "vector field needs {} cells, got {}",
                grid.cell_count(),
                values.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::InvalidParameter(format!("vector field cell {i} is not finite")));
            }
        }
        Ok(VectorField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        VectorField { grid, values: vec![[0.0; 2]; grid.cell_count()] }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.values
    }

    pub fn add_scaled(&self, c: f64, other: &VectorField) -> VectorField {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| [a[0] + c * b[0], a[1] + c * b[1]])
            .collect();
        VectorField { grid: self.grid, values }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.add_scaled(-1.0, other)
    }

    pub fn scale(&self, c: f64) -> VectorField {
        VectorField {
            grid: self.grid,
            values: self.values.iter().map(|v| [c * v[0], c * v[1]]).collect(),
        }
    }

    /// Euclidean length of the vector in one cell.
    pub fn cell_norm(&self, cell: usize) -> f64 {
        let v = self.values[cell];
        (v[0] * v[0] + v[1] * v[1]).sqrt()
    }

    /// Discrete L2 norm, `sqrt(sum |w_c|^2 h^dim)`.
    pub fn norm_l2h(&self) -> f64 {
        let vol = self.grid.cell_volume();
        self.values
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1]) * vol)
            .sum::<f64>()
            .sqrt()
    }

    /// Discrete L^p norm `(sum |w_c|^p h^dim)^(1/p)` for `p >= 1`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("lp norm needs p >= 1, got {p}")));
        }
        let vol = self.grid.cell_volume();
        let sum: f64 = (0..self.values.len())
            .map(|c| self.cell_norm(c).powf(p) * vol)
            .sum();
        Ok(sum.powf(1.0 / p))
    }
}

/// Value of the full nodal array at (kx, ky) in 0..=n per axis;
/// boundary nodes are zero.
#[inline]
fn node_value_2d(u: &NodeField, kx: usize, ky: usize) -> f64 {
    let n = u.grid.n;
    if kx == 0 || ky == 0 || kx == n || ky == n {
        0.0
    } else {
        u.values[(ky - 1) * (n - 1) + (kx - 1)]
    }
}

/// Discrete gradient: one d-vector per cell.
pub fn gradient(u: &NodeField) -> VectorField {
    let grid = u.grid;
    let n = grid.n;
    let h = grid.h();
    let mut values = vec![[0.0; 2]; grid.cell_count()];
    match grid.dim {
        1 => {
            for i in 0..n {
                let left = if i == 0 { 0.0 } else { u.values[i - 1] };
                let right = if i == n - 1 { 0.0 } else { u.values[i] };
                values[i] = [(right - left) / h, 0.0];
            }
        }
        _ => {
            for iy in 0..n {
                for ix in 0..n {
                    let sw = node_value_2d(u, ix, iy);
                    let se = node_value_2d(u, ix + 1, iy);
                    let nw = node_value_2d(u, ix, iy + 1);
                    let ne = node_value_2d(u, ix + 1, iy + 1);
                    values[iy * n + ix] =
                        [(se + ne - sw - nw) / (2.0 * h), (nw + ne - sw - se) / (2.0 * h)];
                }
            }
        }
    }
    VectorField { grid, values }
}

/// Adjoint of [`gradient`] with respect to the h-weighted pairings:
/// `sum_c (Du)_c . y_c h^dim = sum_i u_i (D^T y)_i h^dim` for all u.
pub fn gradient_adjoint(y: &VectorField) -> NodeField {
    let grid = y.grid;
    let n = grid.n;
    let h = grid.h();
    let mut values = vec![0.0; grid.interior_node_count()];
    match grid.dim {
        1 => {
            for j in 0..n - 1 {
                values[j] = (y.values[j][0] - y.values[j + 1][0]) / h;
            }
        }
        _ => {
            let m = n - 1;
            for ky in 1..n {
                for kx in 1..n {
                    let sw = y.values[ky * n + kx];
                    let se = y.values[ky * n + (kx - 1)];
                    let nw = y.values[(ky - 1) * n + kx];
                    let ne = y.values[(ky - 1) * n + (kx - 1)];
                    let gx = -sw[0] + se[0] - nw[0] + ne[0];
                    let gy = -sw[1] - se[1] + nw[1] + ne[1];
                    values[(ky - 1) * m + (kx - 1)] = (gx + gy) / (2.0 * h);
                }
            }
        }
    }
    NodeField { grid, values }
}

/// Nodal quadrature pairing `sum_i f_i v_i h^dim`.
pub fn dual_pairing(f: &NodeField, v: &NodeField) -> Result<f64> {
    if f.grid != v.grid {
        return Err(Error::GridMismatch("dual_pairing got fields on different grids".into()));
    }
    let vol = f.grid.cell_volume();
    Ok(f.values.iter().zip(&v.values).map(|(a, b)| a * b * vol).sum())
}

/// Cellwise pairing `sum_c w_c . z_c h^dim`.
pub fn cell_pairing(w: &VectorField, z: &VectorField) -> Result<f64> {
    if w.grid != z.grid {
        return Err(Error::GridMismatch("cell_pairing got fields on different grids".into()));
    }
    let vol = w.grid.cell_volume();
    Ok(w.values
        .iter()
        .zip(&z.values)
        .map(|(a, b)| (a[0] * b[0] + a[1] * b[1]) * vol)
        .sum())
}
