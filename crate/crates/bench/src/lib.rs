//! Instance builders shared by the benchmark targets.

use qvi_core::{CellField, ConstraintSpec, Grid, NodeField, PhiSpec, QviProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 1D unit-source problem with the state-dependent radius
/// `clamp(0.5 + 0.25 |s|, 0.1, 1)`, the same instance the solver
/// regression tests track.
pub fn affine_radius_problem(n: usize) -> QviProblem {
    let grid = Grid::new(1, n).unwrap();
    QviProblem::new(
        grid,
        2.0,
        NodeField::constant(grid, 1.0).unwrap(),
        PhiSpec::zero(),
        ConstraintSpec::affine_clamped(0.5, 0.25, 0.1, 1.0).unwrap(),
    )
    .unwrap()
}

/// 2D problem whose constraint radius is wide enough to stay inactive,
/// so the timing reflects the unconstrained solve path.
pub fn wide_problem_2d(n: usize, p: f64) -> QviProblem {
    let grid = Grid::new(2, n).unwrap();
    QviProblem::new(
        grid,
        p,
        NodeField::constant(grid, 1.0).unwrap(),
        PhiSpec::zero(),
        ConstraintSpec::constant(1e6, 1e6).unwrap(),
    )
    .unwrap()
}

pub fn random_node(grid: Grid, seed: u64) -> NodeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    NodeField::new(
        grid,
        (0..grid.interior_node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

pub fn random_coefficient(grid: Grid, seed: u64) -> CellField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CellField::new(grid, (0..grid.cell_count()).map(|_| rng.gen_range(0.5..2.0)).collect())
        .unwrap()
}
