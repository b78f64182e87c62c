//! Coefficient identification: TV-regularized output least squares
//! over a box-and-TV admissible set, minimized by projected
//! derivative-free pattern search on blockwise-constant coefficients.
//!
//! The objective for a coefficient a is `J(a) = misfit(u(a)) + kappa * tv(a)`
//! where u(a) is the forward fixed-point solve. When the forward
//! problem admits several solutions, u(a) means the deterministic
//! selection computed by the solver (the fixed-point limit from the
//! configured starting iterate); every history row records whether
//! that solve was certified.

use crate::error::{Error, Result};
use crate::grid::{gradient, CellField, Grid, NodeField, VectorField};
use crate::problem::QviProblem;
use crate::qvi::{solve_qvi, QviOptions, SolveReport};

/// Box bounds and TV budget: `c1 <= a <= c2` cellwise, `tv(a) <= c3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleSet {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl AdmissibleSet {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        if !(c1 > 0.0) || !(c2 >= c1) || !c2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need 0 < c1 <= c2 finite, got c1={c1}, c2={c2}"
            )));
        }
        if !(c3 > 0.0) || !c3.is_finite() {
            return Err(Error::InvalidParameter(format!("need c3 > 0 finite, got {c3}")));
        }
        Ok(AdmissibleSet { c1, c2, c3 })
    }

    pub fn contains(&self, a: &CellField) -> bool {
        a.min() >= self.c1 && a.max() <= self.c2 && total_variation(a) <= self.c3
    }
}

/// Observation data; the variant fixes the misfit formula.
#[derive(Debug, Clone, PartialEq)]
pub enum MisfitData {
    /// Squared state misfit `0.5 * sum (u_i - z_i)^2 h^dim`.
    State(NodeField),
    /// Gradient misfit `|g(u) - z|_p` (not squared).
    Gradient(VectorField),
}

impl MisfitData {
    pub fn grid(&self) -> Grid {
        match self {
            MisfitData::State(z) => z.grid(),
            MisfitData::Gradient(z) => z.grid(),
        }
    }
}

/// Pattern-search controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    /// Cap on objective evaluations (each one is a forward solve).
    pub max_evals: usize,
    pub step_init: f64,
    pub step_min: f64,
    /// Step multiplier after a stalled cycle, in (0, 1).
    pub shrink: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions { max_evals: 200, step_init: 0.25, step_min: 1e-4, shrink: 0.5 }
    }
}

/// Everything the inverse solver needs besides the forward problem.
#[derive(Debug, Clone)]
pub struct InverseConfig {
    /// TV weight, `>= 0`.
    pub kappa: f64,
    pub data: MisfitData,
    /// Cells per block edge; must divide n.
    pub block_size: usize,
    pub optimizer: OptimizerOptions,
    pub qvi: QviOptions,
}

/// One objective evaluation.
#[derive(Debug, Clone)]
pub struct IdentRecord {
    pub eval: usize,
    pub a_digest: String,
    pub j: f64,
    pub misfit: f64,
    pub tv: f64,
    pub qvi_converged: bool,
}

/// Append-only log of objective evaluations.
#[derive(Debug, Clone, Default)]
pub struct IdentHistory {
    pub records: Vec<IdentRecord>,
}

impl IdentHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn all_diverged(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| !r.qvi_converged)
    }
}

/// Result of one objective evaluation.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub j: f64,
    pub misfit: f64,
    pub tv: f64,
    pub u: NodeField,
    pub report: SolveReport,
}

/// Output of [`identify`].
#[derive(Debug, Clone)]
pub struct Identification {
    pub a: CellField,
    pub history: IdentHistory,
}

/// One row of [`kappa_sweep`] output.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub kappa: f64,
    pub j: f64,
    pub misfit: f64,
    pub tv: f64,
    pub a_digest: String,
    pub error: Option<String>,
}

/// Anisotropic total variation of a cellwise-constant field: the sum
/// of jumps across interior faces weighted by the face measure
/// `h^(dim-1)`.
pub fn total_variation(a: &CellField) -> f64 {
    let grid = a.grid();
    let n = grid.n();
    let v = a.values();
    match grid.dim() {
        1 => (0..n - 1).map(|i| (v[i + 1] - v[i]).abs()).sum(),
        _ => {
            let h = grid.h();
            let mut tv = 0.0;
            for iy in 0..n {
                for ix in 0..n - 1 {
                    tv += (v[iy * n + ix + 1] - v[iy * n + ix]).abs() * h;
                }
            }
            for iy in 0..n - 1 {
                for ix in 0..n {
                    tv += (v[(iy + 1) * n + ix] - v[iy * n + ix]).abs() * h;
                }
            }
            tv
        }
    }
}

/// Slack of the coercivity bound `|a|_BV - c2 |Omega| <= tv(a)` for
/// box-admissible fields on the unit domain: returns
/// `tv(a) - (|a|_L1 + tv(a) - c2)`, nonnegative whenever `a <= c2`.
pub fn tv_lower_bound_gap(a: &CellField, adm: &AdmissibleSet) -> Result<f64> {
    if a.min() < adm.c1 || a.max() > adm.c2 {
        return Err(Error::Precondition(format!(
            "field must lie in [{}, {}] cellwise, got [{}, {}]",
            adm.c1,
            adm.c2,
            a.min(),
            a.max()
        )));
    }
    let tv = total_variation(a);
    let bv = a.norm_l1h() + tv;
    Ok(tv - (bv - adm.c2))
}

/// Data misfit of a state `u` against the observations.
pub fn misfit(u: &NodeField, data: &MisfitData, p: f64) -> Result<f64> {
    if u.grid() != data.grid() {
        return Err(Error::GridMismatch("misfit got fields on different grids".into()));
    }
    match data {
        MisfitData::State(z) => {
            let vol = u.grid().cell_volume();
            Ok(0.5
                * u.values()
                    .iter()
                    .zip(z.values())
                    .map(|(a, b)| (a - b) * (a - b) * vol)
                    .sum::<f64>())
        }
        MisfitData::Gradient(z) => gradient(u).sub(z).lp_norm(p),
    }
}

/// Stable digest of a coefficient snapshot (FNV-1a over the bit
/// patterns), so histories can reference fields without storing them.
pub fn field_digest(values: &[f64]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    format!("{h:016x}")
}

/// Evaluates `J(a) = misfit + kappa * tv(a)` with a full forward solve
/// and appends one history record. A non-converged forward solve is
/// flagged in the record, not fatal.
pub fn evaluate_objective(
    prob: &QviProblem,
    a: &CellField,
    cfg: &InverseConfig,
    history: &mut IdentHistory,
) -> Result<ObjectiveEval> {
    let sol = solve_qvi(prob, a, &cfg.qvi)?;
    let mis = misfit(&sol.u, &cfg.data, prob.p())?;
    let tv = total_variation(a);
    let j = mis + cfg.kappa * tv;
    history.records.push(IdentRecord {
        eval: history.len() + 1,
        a_digest: field_digest(a.values()),
        j,
        misfit: mis,
        tv,
        qvi_converged: sol.report.converged,
    });
    Ok(ObjectiveEval { j, misfit: mis, tv, u: sol.u, report: sol.report })
}

fn check_inverse_config(prob: &QviProblem, cfg: &InverseConfig) -> Result<()> {
    if !(cfg.kappa >= 0.0) || !cfg.kappa.is_finite() {
        return Err(Error::InvalidConfig(format!("kappa must be >= 0, got {}", cfg.kappa)));
    }
    let n = prob.grid().n();
    if cfg.block_size == 0 || n % cfg.block_size != 0 {
        return Err(Error::InvalidConfig(format!(
            "block_size must divide n = {n}, got {}",
            cfg.block_size
        )));
    }
    if cfg.data.grid() != prob.grid() {
        return Err(Error::GridMismatch("observation data lives on a different grid".into()));
    }
    let o = &cfg.optimizer;
    if !(o.step_init > 0.0) || !(o.step_min > 0.0) || o.step_min > o.step_init {
        return Err(Error::InvalidConfig(format!(
            "need 0 < step_min <= step_init, got {} and {}",
            o.step_min, o.step_init
        )));
    }
    if !(o.shrink > 0.0 && o.shrink < 1.0) {
        return Err(Error::InvalidConfig(format!("shrink must lie in (0,1), got {}", o.shrink)));
    }
    if o.max_evals == 0 {
        return Err(Error::InvalidConfig("max_evals must be at least 1".into()));
    }
    Ok(())
}

/// Number of blocks per axis and the cell-to-block map.
fn expand_blocks(grid: Grid, block_size: usize, blocks: &[f64]) -> Result<CellField> {
    let n = grid.n();
    let nb = n / block_size;
    let mut values = vec![0.0; grid.cell_count()];
    match grid.dim() {
        1 => {
            for c in 0..n {
                values[c] = blocks[c / block_size];
            }
        }
        _ => {
            for iy in 0..n {
                for ix in 0..n {
                    values[iy * n + ix] = blocks[(iy / block_size) * nb + (ix / block_size)];
                }
            }
        }
    }
    CellField::new(grid, values)
}

/// Identifies a blockwise-constant coefficient by projected pattern
/// search: start at the box midpoint, cycle per-block moves of +-step
/// clamped to the box, reject TV-budget violations outright, accept
/// strict decreases, shrink the step after a stalled cycle, stop once
/// the step drops below `step_min` or the evaluation budget runs out.
/// The output never leaves the admissible set, and its objective never
/// exceeds the starting one.
pub fn identify(prob: &QviProblem, cfg: &InverseConfig, adm: &AdmissibleSet) -> Result<Identification> {
    check_inverse_config(prob, cfg)?;
    let grid = prob.grid();
    let nb_total = (grid.n() / cfg.block_size).pow(grid.dim() as u32);

    let mut blocks = vec![0.5 * (adm.c1 + adm.c2); nb_total];
    let mut history = IdentHistory::default();
    let a0 = expand_blocks(grid, cfg.block_size, &blocks)?;
    let mut best = evaluate_objective(prob, &a0, cfg, &mut history)?;
    let mut step = cfg.optimizer.step_init;

    'search: while step >= cfg.optimizer.step_min && history.len() < cfg.optimizer.max_evals {
        if best.j == 0.0 {
            // the objective is nonnegative; nothing can strictly improve
            break;
        }
        let mut improved = false;
        for b in 0..nb_total {
            for dir in [1.0, -1.0] {
                if history.len() >= cfg.optimizer.max_evals {
                    break 'search;
                }
                let cand_val = (blocks[b] + dir * step).clamp(adm.c1, adm.c2);
                if cand_val == blocks[b] {
                    continue;
                }
                let mut cand = blocks.clone();
                cand[b] = cand_val;
                let a_cand = expand_blocks(grid, cfg.block_size, &cand)?;
                if total_variation(&a_cand) > adm.c3 {
                    continue;
                }
                let eval = evaluate_objective(prob, &a_cand, cfg, &mut history)?;
                if eval.j < best.j {
                    blocks = cand;
                    best = eval;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= cfg.optimizer.shrink;
        }
    }

    if history.all_diverged() {
        return Err(Error::AllEvaluationsDiverged { history });
    }
    let a = expand_blocks(grid, cfg.block_size, &blocks)?;
    Ok(Identification { a, history })
}

/// Runs [`identify`] once per regularization weight, each with a fresh
/// history, and collects one summary row per weight. Failures are
/// flagged in their row instead of aborting the sweep.
pub fn kappa_sweep(
    prob: &QviProblem,
    cfg: &InverseConfig,
    adm: &AdmissibleSet,
    kappas: &[f64],
) -> Result<Vec<SweepRow>> {
    if kappas.is_empty() {
        return Err(Error::InvalidConfig("kappa list must not be empty".into()));
    }
    let mut rows = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let mut one = cfg.clone();
        one.kappa = kappa;
        match identify(prob, &one, adm) {
            Ok(ident) => {
                let last_best = ident
                    .history
                    .records
                    .iter()
                    .filter(|r| r.a_digest == field_digest(ident.a.values()))
                    .last()
                    .cloned();
                let (j, mis, tv) = match last_best {
                    Some(rec) => (rec.j, rec.misfit, rec.tv),
                    None => (f64::NAN, f64::NAN, total_variation(&ident.a)),
                };
                rows.push(SweepRow {
                    kappa,
                    j,
                    misfit: mis,
                    tv,
                    a_digest: field_digest(ident.a.values()),
                    error: None,
                });
            }
            Err(e) => rows.push(SweepRow {
                kappa,
                j: f64::NAN,
                misfit: f64::NAN,
                tv: f64::NAN,
                a_digest: String::new(),
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(rows)
}
