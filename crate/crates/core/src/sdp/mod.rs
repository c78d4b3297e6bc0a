//! Block-diagonal semidefinite programs in the standard primal form
//!
//! ```text
//! min ⟨C, X⟩  s.t.  ⟨A_k, X⟩ = b_k,  X ⪰ 0
//! ```
//!
//! `X` is a list of blocks; `Psd` blocks are dense symmetric matrices and
//! `Diag` blocks are nonnegative vectors (a run of 1×1 blocks, used for
//! slack variables). Every `A_k` and `C` is symmetric and stored as its
//! upper-triangle matrix elements, so an off-diagonal element `a` at `(i, j)`
//! contributes `2·a·X_ij` to `⟨A_k, X⟩`. [`RowBuilder`] converts from
//! "coefficient on the variable `X_ij`" to this form.
//!
//! A row may also carry rank-one terms `w · vᵀ X_b v` on a `Psd` block.

mod blocks;
mod deps;
mod operator;
mod sdpa;
mod solver;

use std::collections::BTreeMap;

use thiserror::Error;

pub use blocks::{BlockData, BlockVector};
pub use deps::{independent_rows, RowSelection};
pub use operator::CompiledOperator;
pub use sdpa::{read_sdpa, write_sdpa};
pub use solver::{evaluate_row, project_psd, residuals, solve_bpsdp, solve_bpsdp_from, SolverOptions};

#[derive(Debug, Error, PartialEq)]
pub enum SdpError {
    #[error("row {row}: {msg}")]
    InvalidRow { row: usize, msg: String },
    #[error("cost: {0}")]
    InvalidCost(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("eigendecomposition failed on block {0}")]
    Eigen(usize),
    #[error("linearly dependent rows with inconsistent right-hand side (row {row}, residual {residual:e})")]
    InconsistentRows { row: usize, residual: f64 },
    #[error("matrix is not symmetric (defect {0:e})")]
    NotSymmetric(f64),
    #[error("normal-equation solve broke down")]
    NormalSystem,
    #[error("SDPA line {line}: {msg}")]
    Sdpa { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Psd,
    Diag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub name: String,
    pub kind: BlockKind,
    pub dim: usize,
}

/// Upper-triangle matrix element of a symmetric coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Rank-one term `weight · vᵀ X_block v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRank {
    pub block: usize,
    pub weight: f64,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row {
    pub entries: Vec<Entry>,
    pub low_rank: Vec<LowRank>,
}

impl Row {
    /// `⟨A, A⟩` restricted to the sparse entries (rank-one terms ignored).
    pub fn sparse_norm_sqr(&self) -> f64 {
        self.entries.iter().map(|e| if e.i == e.j { e.value * e.value } else { 2.0 * e.value * e.value }).sum()
    }
}

/// Accumulates coefficients on variables and emits a [`Row`].
#[derive(Debug, Clone, Default)]
pub struct RowBuilder {
    coefs: BTreeMap<(usize, usize, usize), f64>,
    low_rank: Vec<LowRank>,
}

impl RowBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `coef · X_ij`; `X_ij` and `X_ji` are the same variable.
    pub fn var(&mut self, block: usize, i: usize, j: usize, coef: f64) -> &mut Self {
        let key = if i <= j { (block, i, j) } else { (block, j, i) };
        *self.coefs.entry(key).or_insert(0.0) += coef;
        self
    }

    pub fn low_rank(&mut self, block: usize, weight: f64, v: Vec<f64>) -> &mut Self {
        self.low_rank.push(LowRank { block, weight, v });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.coefs.values().all(|&c| c == 0.0) && self.low_rank.is_empty()
    }

    pub fn build(&self) -> Row {
        let entries = self
            .coefs
            .iter()
            .filter(|(_, &c)| c != 0.0)
            .map(|(&(block, i, j), &c)| Entry { block, i, j, value: if i == j { c } else { 0.5 * c } })
            .collect();
        Row { entries, low_rank: self.low_rank.clone() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<BlockSpec>,
    pub c: Row,
    pub rows: Vec<Row>,
    pub b: Vec<f64>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, name: impl Into<String>, kind: BlockKind, dim: usize) -> usize {
        self.blocks.push(BlockSpec { name: name.into(), kind, dim });
        self.blocks.len() - 1
    }

    /// Appends `⟨row, X⟩ = rhs` and returns its index.
    pub fn add_row(&mut self, row: Row, rhs: f64) -> usize {
        self.rows.push(row);
        self.b.push(rhs);
        self.rows.len() - 1
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    /// Checks indices, triangle convention, duplicates and rank-one vector lengths.
    pub fn validate(&self) -> Result<(), SdpError> {
        if self.rows.len() != self.b.len() {
            return Err(SdpError::Dimension(format!("{} rows but {} right-hand sides", self.rows.len(), self.b.len())));
        }
        self.check_row(&self.c).map_err(SdpError::InvalidCost)?;
        for (k, r) in self.rows.iter().enumerate() {
            self.check_row(r).map_err(|msg| SdpError::InvalidRow { row: k, msg })?;
        }
        Ok(())
    }

    fn check_row(&self, row: &Row) -> Result<(), String> {
        let mut seen = std::collections::HashSet::new();
        for e in &row.entries {
            let spec = self.blocks.get(e.block).ok_or_else(|| format!("unknown block {}", e.block))?;
            if e.i > e.j || e.j >= spec.dim {
                return Err(format!("entry ({}, {}) invalid for block `{}` of size {}", e.i, e.j, spec.name, spec.dim));
            }
            if spec.kind == BlockKind::Diag && e.i != e.j {
                return Err(format!("off-diagonal entry in diagonal block `{}`", spec.name));
            }
            if !seen.insert((e.block, e.i, e.j)) {
                return Err(format!("duplicate entry ({}, {}, {})", e.block, e.i, e.j));
            }
            if !e.value.is_finite() {
                return Err("non-finite coefficient".into());
            }
        }
        for lr in &row.low_rank {
            let spec = self.blocks.get(lr.block).ok_or_else(|| format!("unknown block {}", lr.block))?;
            if spec.kind != BlockKind::Psd || lr.v.len() != spec.dim {
                return Err(format!("rank-one term does not fit block `{}`", spec.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIter,
    NumericalFailure,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIter => "max_iter",
            SolverStatus::NumericalFailure => "numerical_failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: BlockVector,
    pub y: Vec<f64>,
    pub z: BlockVector,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub status: SolverStatus,
    /// Final penalty parameter.
    pub sigma: f64,
    /// `(iteration, primal, dual, gap)` sampled every few iterations.
    pub history: Vec<(usize, f64, f64, f64)>,
}
