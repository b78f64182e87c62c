//! The five subcommands behind the binary. Each returns a structured
//! error that maps onto the exit-code contract: 0 success, 1 a
//! verification check failed, 2 solver non-convergence, 3 invalid
//! input.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use qvi_core::{
    check_feasible, gradient, hoelder_gap, linearity_defect, minty_check, monotone_gap, radii_of,
    solve_qvi, total_variation, tv_lower_bound_gap, CellField, Error as CoreError, Grid,
    IdentHistory, NodeField, QviProblem,
};

use crate::config::{MisfitMode, RunConfig};
use crate::field_file;
use crate::report;

#[derive(Debug)]
pub enum CliError {
    /// A hypothesis or solution check failed (exit 1).
    VerificationFailed(String),
    /// The solver ran but did not converge (exit 2).
    NonConvergence(String),
    /// Bad configuration, file or argument (exit 3).
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerificationFailed(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Invalid(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::VerificationFailed(m) => write!(f, "verification failed: {m}"),
            CliError::NonConvergence(m) => write!(f, "solver did not converge: {m}"),
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::AllEvaluationsDiverged { .. } => CliError::NonConvergence(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<field_file::FieldFileError> for CliError {
    fn from(e: field_file::FieldFileError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn write_io(path: &Path, r: std::result::Result<(), field_file::FieldFileError>) -> Result<()> {
    r.map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", path.display())))
}

fn load_cell_on(path: &Path, grid: Grid) -> Result<CellField> {
    let f = field_file::read(path)?.into_cell()?;
    if f.grid() != grid {
        return Err(CliError::Invalid(format!(
            "{}: grid differs from problem.dim/n",
            path.display()
        )));
    }
    Ok(f)
}

fn load_node_on(path: &Path, grid: Grid) -> Result<NodeField> {
    let f = field_file::read(path)?.into_node()?;
    if f.grid() != grid {
        return Err(CliError::Invalid(format!(
            "{}: grid differs from problem.dim/n",
            path.display()
        )));
    }
    Ok(f)
}

/// Solves the forward problem at a ground-truth coefficient and writes
/// the observation field (state or gradient per the misfit mode) with
/// seeded Gaussian noise added entrywise. The header records seed and
/// sigma.
pub fn synth(
    config: &Path,
    a_true: &Path,
    sigma: f64,
    out: &Path,
    seed_override: Option<u64>,
) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(CliError::Invalid(format!("--sigma must be >= 0 and finite, got {sigma}")));
    }
    let cfg = RunConfig::load(config)?;
    let prob = cfg.problem()?;
    let mode = cfg.misfit_mode()?;
    let adm = cfg.admissible()?;
    let a = load_cell_on(a_true, prob.grid())?;
    if !adm.contains(&a) {
        return Err(CliError::Invalid(format!(
            "a_true is not admissible: range [{}, {}] must lie in [{}, {}] and tv {} <= {}",
            a.min(),
            a.max(),
            adm.c1,
            adm.c2,
            total_variation(&a),
            adm.c3
        )));
    }

    let sol = solve_qvi(&prob, &a, &cfg.qvi_options()?)?;
    if !sol.report.converged {
        return Err(CliError::NonConvergence(format!(
            "forward solve at a_true: fp_residual {:.3e}",
            sol.report.fp_residual()
        )));
    }

    let seed = seed_override.unwrap_or(cfg.solver()?.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| CliError::Invalid(format!("bad noise parameters: {e}")))?;
    let extra = vec![
        ("seed".to_string(), seed.to_string()),
        ("sigma".to_string(), format!("{sigma:e}")),
    ];

    match mode {
        MisfitMode::State => {
            let mut z = sol.u.clone();
            for v in z.values_mut() {
                *v += normal.sample(&mut rng);
            }
            write_io(out, field_file::write_node(out, &z, &extra))?;
        }
        MisfitMode::Gradient => {
            let mut z = gradient(&sol.u);
            let dim = prob.grid().dim();
            for v in z.values_mut() {
                v[0] += normal.sample(&mut rng);
                if dim == 2 {
                    v[1] += normal.sample(&mut rng);
                }
            }
            write_io(out, field_file::write_vector(out, &z, &extra))?;
        }
    }
    Ok(())
}

/// Runs the forward solve at a given coefficient; writes the state and
/// the full report. Non-convergence still writes both, then exits 2.
pub fn forward(config: &Path, a_path: &Path, out: &Path, report_path: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let prob = cfg.problem()?;
    let a = load_cell_on(a_path, prob.grid())?;
    let sol = solve_qvi(&prob, &a, &cfg.qvi_options()?)?;
    write_io(out, field_file::write_node(out, &sol.u, &[]))?;
    std::fs::write(report_path, report::render_solve_report(&sol.report))
        .map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", report_path.display())))?;
    if !sol.report.converged {
        return Err(CliError::NonConvergence(format!(
            "fp_residual {:.3e} after {} outer iterations",
            sol.report.fp_residual(),
            sol.report.outer_iterations
        )));
    }
    Ok(())
}

/// Identifies the coefficient from the configured observations; writes
/// the recovered field and the evaluation history. A history is
/// written even when every forward solve diverged.
pub fn invert(config: &Path, out: &Path, history_path: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let prob = cfg.problem()?;
    let inv = cfg.inverse(&prob)?;
    let adm = cfg.admissible()?;
    let write_history = |h: &IdentHistory| -> Result<()> {
        std::fs::write(history_path, report::render_history_csv(h)).map_err(|e| {
            CliError::Invalid(format!("cannot write {}: {e}", history_path.display()))
        })
    };
    match qvi_core::identify(&prob, &inv, &adm) {
        Ok(ident) => {
            write_io(out, field_file::write_cell(out, &ident.a, &[]))?;
            write_history(&ident.history)
        }
        Err(CoreError::AllEvaluationsDiverged { history }) => {
            write_history(&history)?;
            Err(CliError::NonConvergence("every objective evaluation diverged".into()))
        }
        Err(e) => Err(e.into()),
    }
}

struct CheckRow {
    name: &'static str,
    passed: bool,
    detail: String,
}

/// Audits a (coefficient, state) pair against the structural
/// hypotheses and the inequality formulation, printing one row per
/// check. Any failing row exits 1.
pub fn verify(
    config: &Path,
    a_path: &Path,
    u_path: &Path,
    samples: usize,
    seed_override: Option<u64>,
) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let prob = cfg.problem()?;
    let adm = cfg.admissible()?;
    let a = load_cell_on(a_path, prob.grid())?;
    let u = load_node_on(u_path, prob.grid())?;
    let seed = seed_override.unwrap_or(cfg.solver()?.seed);
    let tol_kkt = cfg.solver()?.tol_kkt;

    let mut rows: Vec<CheckRow> = Vec::new();

    let r = radii_of(&prob, &u)?;
    let feas = check_feasible(&u, &r, tol_kkt)?;
    rows.push(CheckRow {
        name: "self_feasibility",
        passed: feas.feasible,
        detail: format!("max violation {:.3e} (tol {:.1e})", feas.max_violation, tol_kkt),
    });

    let minty = minty_check(&prob, &a, &u, samples, seed)?;
    let minty_ok = minty.self_feasible && minty.min_scaled_slack >= -1e-6;
    rows.push(CheckRow {
        name: "minty_inequality",
        passed: minty_ok,
        detail: format!(
            "min scaled slack {:.3e} over {} samples (threshold -1e-6)",
            minty.min_scaled_slack, minty.samples
        ),
    });

    // randomized structural audits of the operator at this coefficient
    let probes = audit_fields(prob.grid(), seed ^ 0x9e3779b97f4a7c15, 32);
    let mut worst_monotone = f64::INFINITY;
    let mut worst_linear = f64::NEG_INFINITY;
    let mut worst_hoelder = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x517cc1b727220a95);
    for pair in probes.chunks(2) {
        if pair.len() < 2 {
            break;
        }
        let (x, y) = (&pair[0], &pair[1]);
        let scale = operator_scale(&prob, &a, x, y);
        worst_monotone = worst_monotone.min(monotone_gap(&prob, &a, x, y)? / scale);

        let t: f64 = rand::Rng::gen_range(&mut rng, 0.05..=0.95);
        let a1 = a.scale(t);
        let a2 = a.scale(1.0 - t);
        worst_linear = worst_linear.max(linearity_defect(&prob, &a1, &a2, x, y)? / scale);

        let b = a.scale(rand::Rng::gen_range(&mut rng, 0.1..=0.9));
        worst_hoelder = worst_hoelder.min(hoelder_gap(&prob, &a, &b, x, y)? / scale);
    }
    rows.push(CheckRow {
        name: "operator_monotone",
        passed: worst_monotone >= -1e-10,
        detail: format!("min normalized gap {worst_monotone:.3e}"),
    });
    rows.push(CheckRow {
        name: "operator_linear_in_a",
        passed: worst_linear <= 1e-10,
        detail: format!("max normalized defect {worst_linear:.3e}"),
    });
    rows.push(CheckRow {
        name: "operator_hoelder_bound",
        passed: worst_hoelder >= -1e-10,
        detail: format!("min normalized gap {worst_hoelder:.3e}"),
    });

    // the self case is exact: both sides of the bound vanish
    let self_gap = hoelder_gap(&prob, &a, &a, &u, &u)?;
    rows.push(CheckRow {
        name: "hoelder_self_gap",
        passed: self_gap == 0.0,
        detail: format!("gap at (a, a) = {self_gap:.3e}"),
    });

    let tv_row = match tv_lower_bound_gap(&a, &adm) {
        Ok(gap) => CheckRow {
            name: "tv_lower_bound",
            passed: gap >= -1e-12,
            detail: format!("slack {gap:.3e}"),
        },
        Err(e) => CheckRow {
            name: "tv_lower_bound",
            passed: false,
            detail: format!("coefficient outside the admissible box: {e}"),
        },
    };
    rows.push(tv_row);

    let mut all = true;
    for row in &rows {
        let verdict = if row.passed { "pass" } else { "FAIL" };
        println!("{:<24} {} {}", row.name, verdict, row.detail);
        all &= row.passed;
    }
    println!("verify: {}", if all { "PASS" } else { "FAIL" });
    if all {
        Ok(())
    } else {
        let failed: Vec<&str> =
            rows.iter().filter(|r| !r.passed).map(|r| r.name).collect();
        Err(CliError::VerificationFailed(failed.join(", ")))
    }
}

fn audit_fields(grid: Grid, seed: u64, count: usize) -> Vec<NodeField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            NodeField::new(
                grid,
                (0..grid.interior_node_count())
                    .map(|_| rand::Rng::gen_range(&mut rng, -1.0..=1.0))
                    .collect(),
            )
            .unwrap()
        })
        .collect()
}

fn operator_scale(prob: &QviProblem, a: &CellField, x: &NodeField, y: &NodeField) -> f64 {
    let p = prob.p();
    let gx = gradient(x).lp_norm(p).unwrap_or(1.0);
    let gy = gradient(y).lp_norm(p).unwrap_or(1.0);
    (1.0 + gx + gy).powf(p) * (1.0 + a.max())
}

/// Runs the identification once per requested weight and writes one
/// CSV row each. Exit 0 needs at least one clean row.
pub fn sweep(config: &Path, kappas: &[f64], out: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let prob = cfg.problem()?;
    let inv = cfg.inverse(&prob)?;
    let adm = cfg.admissible()?;
    let rows = qvi_core::kappa_sweep(&prob, &inv, &adm, kappas)?;
    std::fs::write(out, report::render_sweep_csv(&rows))
        .map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", out.display())))?;
    if rows.iter().any(|r| r.error.is_none()) {
        Ok(())
    } else {
        Err(CliError::NonConvergence("no sweep entry succeeded".into()))
    }
}

pub fn parse_kappa_list(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Err(CliError::Invalid("--kappas list is empty".into()));
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Invalid(format!("--kappas: not a number: {t:?}")))
        })
        .collect()
}
