//! Flat `key = value` run configuration. Every key is namespaced
//! (`problem.`, `admissible.`, `inverse.`, `solver.`); unknown keys,
//! duplicates and keys that do not apply to the declared variants are
//! all rejected with the offending key named. Which keys are required
//! depends on the subcommand; the assemblers below each demand their
//! own set.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qvi_core::{
    AdmissibleSet, ConstraintSpec, Grid, InnerOptions, InverseConfig, MisfitData, NodeField,
    OptimizerOptions, PhiSpec, QviOptions, QviProblem,
};

use crate::field_file;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

const KNOWN_KEYS: &[&str] = &[
    "problem.dim",
    "problem.n",
    "problem.p",
    "problem.phi",
    "problem.phi_lambda",
    "problem.phi_lo",
    "problem.phi_hi",
    "problem.c_variant",
    "problem.c_alpha",
    "problem.c_beta",
    "problem.c_floor",
    "problem.c0",
    "problem.m_file",
    "problem.m_const",
    "admissible.c1",
    "admissible.c2",
    "admissible.c3",
    "inverse.kappa",
    "inverse.misfit_mode",
    "inverse.block_size",
    "inverse.z_file",
    "solver.tol_kkt",
    "solver.tol_fp",
    "solver.max_inner",
    "solver.max_outer",
    "solver.max_evals",
    "solver.seed",
];

/// Parsed key/value pairs plus the directory used to resolve relative
/// file references.
#[derive(Debug, Clone)]
pub struct RunConfig {
    map: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("line {}: expected key = value, got {line:?}", idx + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError(format!("unknown key {key:?}")));
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(ConfigError(format!("duplicate key {key:?}")));
            }
        }
        Ok(RunConfig { map, base_dir: base_dir.to_path_buf() })
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| ConfigError(format!("missing required key {key:?}")))
    }

    fn reject_if_present(&self, key: &str, why: &str) -> Result<()> {
        if self.map.contains_key(key) {
            return Err(ConfigError(format!("key {key:?} does not apply: {why}")));
        }
        Ok(())
    }

    fn require_f64(&self, key: &str) -> Result<f64> {
        self.require(key)?
            .parse()
            .map_err(|_| ConfigError(format!("key {key:?}: not a number: {:?}", self.get(key))))
    }

    fn require_usize(&self, key: &str) -> Result<usize> {
        self.require(key)?
            .parse()
            .map_err(|_| ConfigError(format!("key {key:?}: not an integer: {:?}", self.get(key))))
    }

    fn optional_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => {
                s.parse().map_err(|_| ConfigError(format!("key {key:?}: not a number: {s:?}")))
            }
        }
    }

    fn optional_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => {
                s.parse().map_err(|_| ConfigError(format!("key {key:?}: not an integer: {s:?}")))
            }
        }
    }

    fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Assembles the forward problem; required for every subcommand.
    pub fn problem(&self) -> Result<QviProblem> {
        let dim = self.require_usize("problem.dim")?;
        let n = self.require_usize("problem.n")?;
        let grid = Grid::new(dim, n).map_err(|e| ConfigError(e.to_string()))?;
        let p = self.require_f64("problem.p")?;

        let phi = match self.require("problem.phi")? {
            "zero" => {
                self.reject_if_present("problem.phi_lambda", "problem.phi is zero")?;
                self.reject_if_present("problem.phi_lo", "problem.phi is zero")?;
                self.reject_if_present("problem.phi_hi", "problem.phi is zero")?;
                PhiSpec::zero()
            }
            "abs" => {
                self.reject_if_present("problem.phi_lo", "problem.phi is abs")?;
                self.reject_if_present("problem.phi_hi", "problem.phi is abs")?;
                PhiSpec::abs(self.require_f64("problem.phi_lambda")?)
                    .map_err(|e| ConfigError(e.to_string()))?
            }
            "box" => {
                self.reject_if_present("problem.phi_lambda", "problem.phi is box")?;
                PhiSpec::boxed(
                    self.require_f64("problem.phi_lo")?,
                    self.require_f64("problem.phi_hi")?,
                )
                .map_err(|e| ConfigError(e.to_string()))?
            }
            other => {
                return Err(ConfigError(format!(
                    "problem.phi: unknown variant {other:?}, expected zero, abs or box"
                )))
            }
        };

        let c0 = self.require_f64("problem.c0")?;
        let constraint = match self.require("problem.c_variant")? {
            // for the constant map, c_alpha carries the radius
            "constant" => {
                self.reject_if_present("problem.c_beta", "problem.c_variant is constant")?;
                self.reject_if_present("problem.c_floor", "problem.c_variant is constant")?;
                ConstraintSpec::constant(self.require_f64("problem.c_alpha")?, c0)
                    .map_err(|e| ConfigError(e.to_string()))?
            }
            "affine_clamped" => ConstraintSpec::affine_clamped(
                self.require_f64("problem.c_alpha")?,
                self.require_f64("problem.c_beta")?,
                self.require_f64("problem.c_floor")?,
                c0,
            )
            .map_err(|e| ConfigError(e.to_string()))?,
            other => {
                return Err(ConfigError(format!(
                    "problem.c_variant: unknown variant {other:?}, expected constant or affine_clamped"
                )))
            }
        };

        let m = match (self.get("problem.m_file"), self.get("problem.m_const")) {
            (Some(path), None) => field_file::read(&self.resolve(path))
                .and_then(|f| f.into_node())
                .map_err(|e| ConfigError(format!("problem.m_file: {e}")))
                .and_then(|f| {
                    if f.grid() != grid {
                        Err(ConfigError("problem.m_file: grid differs from problem.dim/n".into()))
                    } else {
                        Ok(f)
                    }
                })?,
            (None, Some(v)) => {
                let c: f64 = v
                    .parse()
                    .map_err(|_| ConfigError(format!("problem.m_const: not a number: {v:?}")))?;
                NodeField::constant(grid, c).map_err(|e| ConfigError(e.to_string()))?
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError(
                    "problem.m_file and problem.m_const are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(ConfigError(
                    "missing required key: one of \"problem.m_file\" or \"problem.m_const\"".into(),
                ))
            }
        };

        QviProblem::new(grid, p, m, phi, constraint).map_err(|e| ConfigError(e.to_string()))
    }

    /// Solver knobs; all optional with documented defaults.
    pub fn solver(&self) -> Result<SolverParams> {
        Ok(SolverParams {
            tol_kkt: self.optional_f64("solver.tol_kkt", 1e-9)?,
            tol_fp: self.optional_f64("solver.tol_fp", 1e-7)?,
            max_inner: self.optional_usize("solver.max_inner", 200_000)?,
            max_outer: self.optional_usize("solver.max_outer", 100)?,
            max_evals: self.optional_usize("solver.max_evals", 200)?,
            seed: self.optional_usize("solver.seed", 0)? as u64,
        })
    }

    pub fn qvi_options(&self) -> Result<QviOptions> {
        let s = self.solver()?;
        Ok(QviOptions {
            inner: InnerOptions { max_iter: s.max_inner, tol_kkt: s.tol_kkt, ..Default::default() },
            tol_fp: s.tol_fp,
            max_outer: s.max_outer,
            init: None,
        })
    }

    /// The box-and-TV admissible set; required for synth, invert,
    /// sweep and verify.
    pub fn admissible(&self) -> Result<AdmissibleSet> {
        AdmissibleSet::new(
            self.require_f64("admissible.c1")?,
            self.require_f64("admissible.c2")?,
            self.require_f64("admissible.c3")?,
        )
        .map_err(|e| ConfigError(e.to_string()))
    }

    /// The misfit variant, without loading data (synth needs this to
    /// know which field to write).
    pub fn misfit_mode(&self) -> Result<MisfitMode> {
        match self.require("inverse.misfit_mode")? {
            "state" => Ok(MisfitMode::State),
            "gradient" => Ok(MisfitMode::Gradient),
            other => Err(ConfigError(format!(
                "inverse.misfit_mode: unknown variant {other:?}, expected state or gradient"
            ))),
        }
    }

    /// Full inverse configuration including the observation file.
    pub fn inverse(&self, prob: &QviProblem) -> Result<InverseConfig> {
        let mode = self.misfit_mode()?;
        let z_path = self.resolve(self.require("inverse.z_file")?);
        let loaded = field_file::read(&z_path)
            .map_err(|e| ConfigError(format!("inverse.z_file: {e}")))?;
        let data = match mode {
            MisfitMode::State => MisfitData::State(
                loaded.into_node().map_err(|e| ConfigError(format!("inverse.z_file: {e}")))?,
            ),
            MisfitMode::Gradient => MisfitData::Gradient(
                loaded.into_vector().map_err(|e| ConfigError(format!("inverse.z_file: {e}")))?,
            ),
        };
        if data.grid() != prob.grid() {
            return Err(ConfigError("inverse.z_file: grid differs from problem.dim/n".into()));
        }
        let adm = self.admissible()?;
        let s = self.solver()?;
        let range = adm.c2 - adm.c1;
        // degenerate c1 = c2 still needs a positive step to satisfy the
        // optimizer preconditions; any value works, nothing can move
        let step_init = if range > 0.0 { range / 4.0 } else { 1.0 };
        let step_min = if range > 0.0 { range * 1e-4 } else { 0.5 };
        Ok(InverseConfig {
            kappa: self.require_f64("inverse.kappa")?,
            data,
            block_size: self.require_usize("inverse.block_size")?,
            optimizer: OptimizerOptions {
                max_evals: s.max_evals,
                step_init,
                step_min,
                shrink: 0.5,
            },
            qvi: self.qvi_options()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MisfitMode {
    State,
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub tol_kkt: f64,
    pub tol_fp: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub max_evals: usize,
    pub seed: u64,
}
