//! Experiment configuration: a TOML tree covering the problem, potential,
//! solver, and per-study blocks, plus the reproducibility metadata stamped
//! onto every output row.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coeff::AffinePotential;
use crate::qmc::is_prime;
use crate::solver::{admissible, ProblemSpec, SolveOptions, SolverError};
use crate::spatial::Grid;

pub const OUT_DIR_ENV: &str = "PAREIG_OUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemBlock {
    pub d: usize,
    pub p: u32,
    pub eta: f64,
    pub cells: usize,
}

impl Default for ProblemBlock {
    fn default() -> Self {
        ProblemBlock {
            d: 1,
            p: 3,
            eta: 1.0,
            cells: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModeFamily {
    /// Interior Gaussian bumps: sensitivities track the sup-norm decay, the
    /// family rate experiments assume.
    #[default]
    Bump,
    /// Oscillatory sine modes; sensitivities carry extra frequency decay.
    Sine,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialBlock {
    pub c: f64,
    pub theta_dec: f64,
    pub b0_margin: f64,
    pub s_max: usize,
    pub family: ModeFamily,
}

impl Default for PotentialBlock {
    fn default() -> Self {
        PotentialBlock {
            c: 1.0,
            theta_dec: 2.0,
            b0_margin: 0.1,
            s_max: 64,
            family: ModeFamily::Bump,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    /// Defaults to 1e-10 in one dimension and 1e-8 in two.
    pub tol: Option<f64>,
    pub damping: f64,
    pub max_iters: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock {
            tol: None,
            damping: 0.5,
            max_iters: 2000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QmcBlock {
    pub s: usize,
    pub n_list: Vec<u64>,
    pub shifts: usize,
    pub delta: f64,
    /// Smoothing exponent; `None` selects it from the nominal decay.
    pub theta: Option<f64>,
    pub include_energy: bool,
    pub include_functional: bool,
}

impl Default for QmcBlock {
    fn default() -> Self {
        QmcBlock {
            s: 4,
            n_list: vec![127, 251, 503, 1009],
            shifts: 16,
            delta: 0.05,
            theta: None,
            include_energy: false,
            include_functional: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationBlock {
    pub s_list: Vec<usize>,
    pub s_ref: usize,
    pub n_outer: u64,
    pub r_outer: usize,
    pub m_strong: usize,
    /// Replace the outer lattice rule by plain Monte Carlo.
    pub mc_fallback: bool,
    pub mc_samples: usize,
}

impl Default for TruncationBlock {
    fn default() -> Self {
        TruncationBlock {
            s_list: vec![2, 4, 8, 16, 32],
            s_ref: 64,
            n_outer: 2003,
            r_outer: 8,
            m_strong: 64,
            mc_fallback: false,
            mc_samples: 4096,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GapBlock {
    pub samples: usize,
    pub s: usize,
}

impl Default for GapBlock {
    fn default() -> Self {
        GapBlock {
            samples: 200,
            s: 16,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DerivBlock {
    pub coords: Vec<u32>,
    pub order_cap: u32,
    pub step_first: f64,
    pub step_higher: f64,
    pub samples: usize,
}

impl Default for DerivBlock {
    fn default() -> Self {
        DerivBlock {
            coords: vec![1, 2],
            order_cap: 2,
            step_first: 1e-3,
            step_higher: 3e-3,
            samples: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub problem: ProblemBlock,
    pub potential: PotentialBlock,
    pub solver: SolverBlock,
    pub qmc: QmcBlock,
    pub truncation: TruncationBlock,
    pub gap: GapBlock,
    pub deriv: DerivBlock,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.problem;
        if p.d != 1 && p.d != 2 {
            return Err(ConfigError::Invalid(format!(
                "d = {} (grids are 1- or 2-dimensional)",
                p.d
            )));
        }
        if !admissible(p.d, p.p) || p.p < 2 {
            return Err(ConfigError::Invalid(format!(
                "(d, p) = ({}, {}) not admissible",
                p.d, p.p
            )));
        }
        if self.potential.theta_dec <= 1.0 {
            return Err(ConfigError::Invalid("theta_dec must exceed 1".into()));
        }
        for &n in &self.qmc.n_list {
            if !is_prime(n) {
                return Err(ConfigError::Invalid(format!(
                    "qmc.n_list entry {} is not prime",
                    n
                )));
            }
        }
        if !is_prime(self.truncation.n_outer) {
            return Err(ConfigError::Invalid(
                "truncation.n_outer must be prime".into(),
            ));
        }
        if !self.truncation.s_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(ConfigError::Invalid(
                "truncation.s_list must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = self.truncation.s_list.last() {
            if last > self.truncation.s_ref {
                return Err(ConfigError::Invalid(
                    "truncation.s_list exceeds s_ref".into(),
                ));
            }
        }
        if self.qmc.shifts < 2 || self.truncation.r_outer < 2 {
            return Err(ConfigError::Invalid(
                "need at least two random shifts".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        if self.problem.d == 1 {
            Grid::unit_interval(self.problem.cells)
        } else {
            Grid::unit_square(self.problem.cells, self.problem.cells)
        }
    }

    pub fn build_potential(&self) -> Result<AffinePotential, ConfigError> {
        let build = match self.potential.family {
            ModeFamily::Bump => AffinePotential::algebraic_bump,
            ModeFamily::Sine => AffinePotential::algebraic_sine,
        };
        build(
            self.potential.c,
            self.potential.theta_dec,
            self.potential.s_max,
            self.potential.b0_margin,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn build_problem(&self) -> Result<ProblemSpec, ConfigError> {
        let grid = self.grid();
        let pot = self.build_potential()?;
        Ok(ProblemSpec::with_unit_diffusion(
            grid,
            pot,
            self.problem.eta,
            self.problem.p,
        )?)
    }

    pub fn solve_options(&self) -> SolveOptions {
        let mut opts = SolveOptions::for_grid(&self.grid());
        if let Some(tol) = self.solver.tol {
            opts.tol = tol;
        }
        opts.damping = self.solver.damping;
        opts.max_iters = self.solver.max_iters;
        opts
    }

    /// Nominal summability exponent of the configured decay, `1/theta_dec`.
    pub fn nominal_q(&self) -> f64 {
        1.0 / self.potential.theta_dec
    }

    /// Guard used by each study runner for its own active dimension.
    pub fn require_active_dim(&self, s: usize, what: &str) -> Result<(), ConfigError> {
        if s > self.potential.s_max {
            return Err(ConfigError::Invalid(format!(
                "{what} = {s} exceeds potential.s_max = {}",
                self.potential.s_max
            )));
        }
        Ok(())
    }

    pub fn resolved_out_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from(".")
    }

    /// Short hash of the scientific configuration; stamped on every CSV row.
    /// Output location and thread count do not change what is computed, so
    /// they are excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        canonical.threads = None;
        let text = toml::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{:02x}", b)).collect();
        hex[..12].to_string()
    }
}

/// Version string stamped on output rows.
pub fn version_string() -> String {
    format!("{}-v{}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// Reproducibility metadata carried by every emitted row.
#[derive(Clone, Debug)]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl RunMeta {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        RunMeta {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            version: version_string(),
        }
    }

    pub fn columns() -> [&'static str; 3] {
        ["config_hash", "seed", "version"]
    }

    pub fn values(&self) -> [String; 3] {
        [
            self.config_hash.clone(),
            self.seed.to_string(),
            self.version.clone(),
        ]
    }
}
