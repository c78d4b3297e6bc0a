//! Shot-budget sweeps over the shadow and v2rdm estimators, plus the
//! post-processing used to compare them.

mod analysis;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::fci::FciError;
use crate::fixtures::ResolveError;
use crate::integrals::IntegralsError;
use crate::sdp::{SdpError, SolverOptions};
use crate::shadow::ShadowError;
use crate::v2rdm::{ObjectiveKind, V2rdmError};

pub use analysis::{
    bias_table, improvement_factor, loglog_slope, median, median_curve, write_bias_csv, BiasRow, FactorEntry,
};
pub use sweep::{
    bias_report, cost_comparison, read_csv, run_sweep, write_cost_csv, write_csv, CellFailure, CostRecord,
    SweepContext, SweepOutput,
};

/// Current value of [`ExperimentConfig::schema_version`].
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Integrals(#[from] IntegralsError),
    #[error(transparent)]
    Fci(#[from] FciError),
    #[error(transparent)]
    Shadow(#[from] ShadowError),
    #[error(transparent)]
    V2rdm(#[from] V2rdmError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("a curve needs at least two points with positive shots and error, got {0}")]
    ShortCurve(usize),
    #[error("the error ranges of the two curves do not overlap")]
    NonOverlapping,
    #[error("missing runs: {0}")]
    MissingRuns(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ShadowOnly,
    V2rdmPlain,
    V2rdmC1,
    V2rdmC2,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::ShadowOnly, Method::V2rdmPlain, Method::V2rdmC1, Method::V2rdmC2];

    pub fn name(self) -> &'static str {
        match self {
            Method::ShadowOnly => "shadow_only",
            Method::V2rdmPlain => "v2rdm_plain",
            Method::V2rdmC1 => "v2rdm_c1",
            Method::V2rdmC2 => "v2rdm_c2",
        }
    }

    pub fn is_v2rdm(self) -> bool {
        self != Method::ShadowOnly
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Gaussian noise at the variance bound.
    #[default]
    Surrogate,
    /// Simulated matchgate measurements of the FCI state.
    TrueSampling,
}

fn default_z() -> f64 {
    1.0
}

fn default_objective() -> ObjectiveKind {
    ObjectiveKind::Energy
}

fn default_batch() -> u64 {
    4096
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Built-in fixture id or path to an FCIDUMP file.
    pub fixture: String,
    pub methods: Vec<Method>,
    /// Total shot budgets, strictly increasing.
    pub budgets: Vec<u64>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default = "default_objective")]
    pub objective: ObjectiveKind,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub noise: NoiseMode,
    /// Half-width (Hartree) of a window around the FCI energy added to every
    /// v2rdm method. Records then carry a `+window` method suffix.
    #[serde(default)]
    pub energy_window: Option<f64>,
    #[serde(default)]
    pub master_seed: u64,
    /// Concurrent cells; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    /// Number of bases for `v2rdm_c2`; by default matched to the shadow variance.
    #[serde(default)]
    pub c2_bases: Option<usize>,
    /// Noise-free rotated diagonals with `ε₂ = 0` for `v2rdm_c2`.
    #[serde(default)]
    pub exact_diagonals: bool,
    /// Shots per RNG stream in true sampling.
    #[serde(default = "default_batch")]
    pub batch_size: u64,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the experiment grid.
    pub fn new(fixture: &str, methods: Vec<Method>, budgets: Vec<u64>, seeds: Vec<u64>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            fixture: fixture.to_string(),
            methods,
            budgets,
            seeds,
            z: default_z(),
            objective: default_objective(),
            solver: SolverOptions::default(),
            noise: NoiseMode::default(),
            energy_window: None,
            master_seed: 0,
            workers: 0,
            c2_bases: None,
            exact_diagonals: false,
            batch_size: default_batch(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.methods.is_empty() || self.budgets.is_empty() || self.seeds.is_empty() {
            return bad("methods, budgets and seeds must be non-empty".into());
        }
        if self.budgets[0] == 0 || self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return bad("budgets must be positive and strictly increasing".into());
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return bad("seeds must be distinct".into());
        }
        let mut m = self.methods.clone();
        m.sort_unstable();
        if m.windows(2).any(|w| w[0] == w[1]) {
            return bad("methods must be distinct".into());
        }
        if !(self.z > 0.0 && self.z.is_finite()) {
            return bad(format!("z must be positive, got {}", self.z));
        }
        if let Some(w) = self.energy_window {
            if !(w > 0.0) {
                return bad(format!("energy window must be positive, got {w}"));
            }
        }
        if self.c2_bases == Some(0) || self.batch_size == 0 {
            return bad("c2_bases and batch_size must be positive".into());
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return bad("solver tolerance and iteration cap must be positive".into());
        }
        Ok(())
    }
}

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub fixture: String,
    pub method: String,
    pub objective: String,
    pub shots: u64,
    pub m_bases: usize,
    pub seed: u64,
    pub energy_est: f64,
    pub energy_fci: f64,
    pub energy_err: f64,
    pub rdm_frob_err: f64,
    pub solver_iters: usize,
    pub solver_gap: f64,
    pub wall_time_s: f64,
}

/// Number of independent 2-RDM elements (upper triangles of the three blocks).
pub fn independent_elements(n_orb: usize) -> usize {
    let np = n_orb * n_orb.saturating_sub(1) / 2;
    let t = |d: usize| d * (d + 1) / 2;
    2 * t(np) + t(n_orb * n_orb)
}

/// Multiplier for which `count` two-sided Gaussian intervals hold jointly
/// with probability at least `1 − alpha` (Bonferroni).
pub fn simultaneous_z(count: usize, alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / (2.0 * count.max(1) as f64))
}

/// Seed of one RNG stream, a hash of everything that identifies the cell.
pub fn cell_seed(master_seed: u64, fixture: &str, stream: &str, budget: u64, seed_index: usize, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(fixture.as_bytes());
    h.update([0]);
    h.update(stream.as_bytes());
    h.update([0]);
    h.update(budget.to_le_bytes());
    h.update((seed_index as u64).to_le_bytes());
    h.update(seed.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
