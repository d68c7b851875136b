//! Run manifests: a flat TOML file with one key per setting.
//!
//! ```toml
//! name = "torus_k4"
//! mode = "partition"      # partition | eigen | relaxation
//! dim = 2
//! n = 256
//! shape = "torus"         # see `ShapeName` for the catalog
//! # size = 3.14159        # optional, shape-specific default otherwise
//! # rotation = 0.0        # optional, 2D only
//! k = 4                   # or a list: k = [4, 5, 6]
//! variant = "alg1"        # alg1 | alg2
//! adaptive = true
//! tau0 = 0.25
//! tau_min = 0.0078125
//! tol_u = 1e-5
//! max_outer = 10000
//! max_inner = 10000
//! # tau_eval = 1e-4       # optional fixed-τ energy re-evaluation
//! seed = 0                # first seed
//! seeds = 10              # count, or an explicit list: seeds = [3, 7, 11]
//! overlay = false         # also write a boundary-overlay PPM in 2D
//! # refine_tol = 1e-4     # optional: per-region first eigenvalues of the best partition
//! ```
//!
//! Eigen mode reads `tol` (a number or a list) plus `tau0` and `max_iter`. Relaxation mode
//! evaluates the relaxed energy of the square's first eigenfunction for each entry of `taus`.

use crate::error::{CliError, Result};
use dirpart::solver::EigenConfig;
use dirpart::{GridSpec, ShapeName, ShapeParams, SolverConfig, Variant};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Partition,
    Eigen,
    Relaxation,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(usize),
    List(Vec<u64>),
}

/// A parsed, not yet validated run description.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub name: String,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub n: usize,
    #[serde(default = "default_shape")]
    pub shape: String,
    pub size: Option<f64>,
    pub rotation: Option<f64>,
    #[serde(default = "default_k")]
    pub k: OneOrMany<usize>,
    #[serde(default = "default_variant")]
    pub variant: String,
    #[serde(default)]
    pub adaptive: bool,
    pub tau0: Option<f64>,
    pub tau_min: Option<f64>,
    pub tol_u: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_inner: Option<usize>,
    pub tau_eval: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    pub seeds: Option<SeedSpec>,
    pub tol: Option<OneOrMany<f64>>,
    pub max_iter: Option<usize>,
    pub taus: Option<Vec<f64>>,
    #[serde(default)]
    pub overlay: bool,
    pub refine_tol: Option<f64>,
}

fn default_dim() -> usize {
    2
}

fn default_shape() -> String {
    "torus".into()
}

fn default_k() -> OneOrMany<usize> {
    OneOrMany::One(1)
}

fn default_variant() -> String {
    "alg1".into()
}

impl RunManifest {
    /// A manifest with every optional field at its default.
    pub fn new(name: impl Into<String>, n: usize) -> Self {
        Self {
            name: name.into(),
            mode: Mode::default(),
            dim: default_dim(),
            n,
            shape: default_shape(),
            size: None,
            rotation: None,
            k: default_k(),
            variant: default_variant(),
            adaptive: false,
            tau0: None,
            tau_min: None,
            tol_u: None,
            max_outer: None,
            max_inner: None,
            tau_eval: None,
            seed: 0,
            seeds: None,
            tol: None,
            max_iter: None,
            taus: None,
            overlay: false,
            refine_tol: None,
        }
    }

    /// Parses TOML text; `origin` labels error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Checks every field against the shape catalog and solver invariants.
    pub fn validate(&self) -> Result<RunPlan> {
        if self.name.trim().is_empty() {
            return Err(CliError::field("name", "must not be empty"));
        }
        let grid = GridSpec::new(self.dim, self.n).map_err(|e| CliError::field("n", e.to_string()))?;
        let shape: ShapeName = self
            .shape
            .parse()
            .map_err(|e: dirpart::Error| CliError::field("shape", e.to_string()))?;
        if let Some(d) = shape.dim() {
            if d != self.dim {
                return Err(CliError::field(
                    "shape",
                    format!("`{shape}` is a {d}D shape but dim = {}", self.dim),
                ));
            }
        }
        let params = ShapeParams {
            size: self.size,
            rotation: self.rotation,
        };
        if let Some(s) = self.size {
            if !(s.is_finite() && s > 0.0) {
                return Err(CliError::field("size", "must be positive"));
            }
        }
        let ks = self.k.to_vec();
        if ks.is_empty() || ks.contains(&0) {
            return Err(CliError::field("k", "every region count must be at least 1"));
        }
        if ks.iter().any(|&k| k > 255) && self.mode == Mode::Partition {
            return Err(CliError::field("k", "at most 255 regions fit the 8-bit label outputs"));
        }

        let variant: Variant = self
            .variant
            .parse()
            .map_err(|e: dirpart::Error| CliError::field("variant", e.to_string()))?;
        let defaults = SolverConfig::default();
        let solver = SolverConfig {
            tau0: self.tau0.unwrap_or(defaults.tau0),
            tau_min: self.tau_min.unwrap_or(defaults.tau_min),
            tol_u: self.tol_u.unwrap_or(defaults.tol_u),
            max_outer: self.max_outer.unwrap_or(defaults.max_outer),
            max_inner: self.max_inner.unwrap_or(defaults.max_inner),
            rng_seed: self.seed,
            variant,
            adaptive: self.adaptive,
            tau_eval: self.tau_eval,
        };
        solver
            .validate()
            .map_err(|e| CliError::field("tau0/tau_min/tol_u/max_outer", e.to_string()))?;

        let seeds = match &self.seeds {
            None => vec![self.seed],
            Some(SeedSpec::Count(0)) => return Err(CliError::field("seeds", "count must be at least 1")),
            Some(SeedSpec::Count(c)) => (0..*c as u64).map(|i| self.seed.wrapping_add(i)).collect(),
            Some(SeedSpec::List(list)) if list.is_empty() => {
                return Err(CliError::field("seeds", "list must not be empty"))
            }
            Some(SeedSpec::List(list)) => list.clone(),
        };

        let refine = match self.refine_tol {
            None => None,
            Some(_) if self.mode != Mode::Partition => {
                return Err(CliError::field("refine_tol", "only used in partition mode"))
            }
            Some(tol) => {
                let cfg = EigenConfig { tol, ..EigenConfig::default() };
                cfg.validate().map_err(|e| CliError::field("refine_tol", e.to_string()))?;
                Some(cfg)
            }
        };

        let mut eigen = Vec::new();
        let mut taus = Vec::new();
        match self.mode {
            Mode::Partition => {}
            Mode::Eigen => {
                if ks != [1] {
                    return Err(CliError::field("k", "eigen mode computes a single region (k = 1)"));
                }
                let tols = self
                    .tol
                    .as_ref()
                    .map(OneOrMany::to_vec)
                    .unwrap_or_else(|| vec![EigenConfig::default().tol]);
                if tols.is_empty() {
                    return Err(CliError::field("tol", "list must not be empty"));
                }
                for tol in tols {
                    let cfg = EigenConfig {
                        tau0: self.tau0.unwrap_or(EigenConfig::default().tau0),
                        tol,
                        max_iter: self.max_iter.unwrap_or(EigenConfig::default().max_iter),
                    };
                    cfg.validate().map_err(|e| CliError::field("tol", e.to_string()))?;
                    eigen.push(cfg);
                }
            }
            Mode::Relaxation => {
                if shape != ShapeName::Square || self.dim != 2 || self.size.is_some() || self.rotation.is_some() {
                    return Err(CliError::field(
                        "shape",
                        "relaxation mode needs the default 2D square, whose eigenfunction is known",
                    ));
                }
                taus = self.taus.clone().unwrap_or_default();
                if taus.is_empty() || taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                    return Err(CliError::field("taus", "need a nonempty list of positive values"));
                }
            }
        }
        Ok(RunPlan {
            name: self.name.clone(),
            mode: self.mode,
            grid,
            shape,
            params,
            ks,
            solver,
            seeds,
            eigen,
            taus,
            overlay: self.overlay,
            refine,
        })
    }
}

/// A validated manifest, ready to execute.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub name: String,
    pub mode: Mode,
    pub grid: GridSpec,
    pub shape: ShapeName,
    pub params: ShapeParams,
    pub ks: Vec<usize>,
    pub solver: SolverConfig,
    pub seeds: Vec<u64>,
    pub eigen: Vec<EigenConfig>,
    pub taus: Vec<f64>,
    pub overlay: bool,
    /// Settings for the per-region eigenvalue pass, when requested.
    pub refine: Option<EigenConfig>,
}
