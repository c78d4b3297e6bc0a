//! Variational 2-RDM optimization under the D, Q and G positivity conditions.
//!
//! Blocks (spin 0 = alpha, 1 = beta):
//!
//! | block | size | content |
//! |---|---|---|
//! | `d1_a`, `d1_b`, `q1_a`, `q1_b` | `n` | one-particle and one-hole matrices |
//! | `d2_aa`, `d2_bb`, `q2_aa`, `q2_bb` | `n(n−1)/2` | same-spin pairs `p < q` |
//! | `d2_ab`, `q2_ab` | `n²` | alpha-beta pairs `p·n + q` |
//! | `g_same` | `2n²` | `[αα; ββ]` particle-hole pairs |
//! | `g_ab`, `g_ba` | `n²` | spin-flip particle-hole pairs |
//!
//! Measurement constraints are two-sided bounds turned into equalities with
//! nonnegative slack variables, which live in `Diag` blocks appended after
//! the base blocks. Their rows are likewise appended, so a solution of the
//! base problem is a valid warm start for a constrained one.

mod constraints;
mod maps;

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrals::{same_spin_coefficient, MolecularIntegrals};
use crate::rdm::{PairBasis, SpinBlockedRdms};
use crate::sdp::{evaluate_row, BlockData, BlockKind, BlockVector, Row, RowBuilder, SdpError, SdpProblem, SdpSolution, SolverStatus};

pub use constraints::{add_diagonal_constraints, add_energy_window, add_shadow_ball};
pub use maps::Expr;

#[derive(Debug, Error, PartialEq)]
pub enum V2rdmError {
    #[error("tolerance must be positive, got {0}")]
    Epsilon(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("solver reported a numerical failure")]
    NumericalFailure,
    #[error("unknown objective `{0}` (expected energy, trace_norm or energy_minus_trace)")]
    UnknownObjective(String),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

/// Row counts per constraint family.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub trace: usize,
    pub contraction: usize,
    pub q_map: usize,
    pub g_map: usize,
    /// Rows on independent upper-triangle elements.
    pub shadow_ball: usize,
    /// Rows the same bound would need on every raw spin-orbital index tuple, `2·(2n)⁴`.
    pub shadow_ball_raw_tuples: usize,
    pub diagonal: usize,
    pub energy_window: usize,
    pub slack_blocks: usize,
    pub slack_variables: usize,
    pub total_rows: usize,
}

impl ConstraintReport {
    pub fn merge(&mut self, o: &ConstraintReport) {
        self.trace += o.trace;
        self.contraction += o.contraction;
        self.q_map += o.q_map;
        self.g_map += o.g_map;
        self.shadow_ball += o.shadow_ball;
        self.shadow_ball_raw_tuples += o.shadow_ball_raw_tuples;
        self.diagonal += o.diagonal;
        self.energy_window += o.energy_window;
        self.slack_blocks += o.slack_blocks;
        self.slack_variables += o.slack_variables;
        self.total_rows += o.total_rows;
    }
}

/// A slack coordinate whose value is fixed by one row once the rest is known.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SlackLink {
    pub row: usize,
    pub block: usize,
    pub index: usize,
    pub coef: f64,
}

/// Block registry and index maps of an assembled problem.
#[derive(Debug, Clone, PartialEq)]
pub struct V2rdmLayout {
    pub n_orb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub pairs: PairBasis,
    pub d1: [usize; 2],
    pub q1: [usize; 2],
    pub d2_same: [usize; 2],
    pub d2_ab: usize,
    pub q2_same: [usize; 2],
    pub q2_ab: usize,
    pub g_same: usize,
    pub g_ab: usize,
    pub g_ba: usize,
    pub slack_blocks: Vec<usize>,
    /// Running totals over everything added to the problem.
    pub report: ConstraintReport,
    pub(crate) slack_links: Vec<SlackLink>,
}

impl V2rdmLayout {
    pub fn eta(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    /// Alpha-beta grid index of `(p_α, q_β)`.
    pub fn ab_index(&self, p: usize, q: usize) -> usize {
        p * self.n_orb + q
    }

    /// Coupled `²G` index of the pair `(p_σ, q_σ)`.
    pub fn g_index(&self, spin: usize, p: usize, q: usize) -> usize {
        spin * self.n_orb * self.n_orb + p * self.n_orb + q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Energy,
    TraceNorm,
    EnergyMinusTrace,
}

impl FromStr for ObjectiveKind {
    type Err = V2rdmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "energy" => Ok(Self::Energy),
            "trace_norm" => Ok(Self::TraceNorm),
            "energy_minus_trace" => Ok(Self::EnergyMinusTrace),
            other => Err(V2rdmError::UnknownObjective(other.to_string())),
        }
    }
}

impl std::fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Energy => "energy",
            Self::TraceNorm => "trace_norm",
            Self::EnergyMinusTrace => "energy_minus_trace",
        })
    }
}

fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Assembles the DQG relaxation with trace, contraction and map rows; the
/// objective is left at zero.
pub fn build_nrep_problem(ints: &MolecularIntegrals) -> (SdpProblem, V2rdmLayout) {
    let n = ints.n_orb;
    let (na, nb) = (ints.n_alpha, ints.n_beta);
    let pairs = PairBasis::new(n);
    let np = pairs.len();
    let mut p = SdpProblem::new();
    let psd = |p: &mut SdpProblem, name: &str, dim: usize| p.add_block(name, BlockKind::Psd, dim);
    let d1 = [psd(&mut p, "d1_a", n), psd(&mut p, "d1_b", n)];
    let q1 = [psd(&mut p, "q1_a", n), psd(&mut p, "q1_b", n)];
    let d2_same = [psd(&mut p, "d2_aa", np), psd(&mut p, "d2_bb", np)];
    let d2_ab = psd(&mut p, "d2_ab", n * n);
    let q2_same = [psd(&mut p, "q2_aa", np), psd(&mut p, "q2_bb", np)];
    let q2_ab = psd(&mut p, "q2_ab", n * n);
    let g_same = psd(&mut p, "g_same", 2 * n * n);
    let g_ab = psd(&mut p, "g_ab", n * n);
    let g_ba = psd(&mut p, "g_ba", n * n);
    let mut layout = V2rdmLayout {
        n_orb: n,
        n_alpha: na,
        n_beta: nb,
        pairs,
        d1,
        q1,
        d2_same,
        d2_ab,
        q2_same,
        q2_ab,
        g_same,
        g_ab,
        g_ba,
        slack_blocks: Vec::new(),
        report: ConstraintReport::default(),
        slack_links: Vec::new(),
    };
    let mut report = ConstraintReport::default();

    // traces, sector by sector on the assembled normalization, then the total
    let sectors = [(d2_same[0], 2.0, na * na.saturating_sub(1)), (d2_same[1], 2.0, nb * nb.saturating_sub(1)), (d2_ab, 1.0, na * nb)];
    for &(blk, w, rhs) in &sectors {
        let mut rb = RowBuilder::new();
        for x in 0..p.blocks[blk].dim {
            rb.var(blk, x, x, w);
        }
        p.add_row(rb.build(), rhs as f64);
    }
    let eta = na + nb;
    let mut rb = RowBuilder::new();
    for &(blk, _, _) in &sectors {
        for x in 0..p.blocks[blk].dim {
            rb.var(blk, x, x, 2.0);
        }
    }
    p.add_row(rb.build(), (eta * eta.saturating_sub(1)) as f64);
    report.trace = 4;

    // partial traces: Σ_q ²D_σσ[(pq),(rq)] = (N_σ−1) ¹D_σ[p,r], Σ_q ²D_αβ = N_τ ¹D_σ
    let counts = [na, nb];
    for spin in 0..2 {
        for a in 0..n {
            for c in a..n {
                let mut same = maps::Expr::default();
                let mut cross = maps::Expr::default();
                for q in 0..n {
                    layout_add_same(&layout, &mut same, spin, (a, q), (c, q));
                    let (x, y) = if spin == 0 { (a * n + q, c * n + q) } else { (q * n + a, q * n + c) };
                    cross.terms.push((d2_ab, x, y, 1.0));
                }
                let other = counts[1 - spin] as f64;
                let own = counts[spin].saturating_sub(1) as f64;
                for (expr, factor) in [(same, own), (cross, other)] {
                    let mut rb = RowBuilder::new();
                    for (b, i, j, coef) in expr.terms {
                        rb.var(b, i, j, coef);
                    }
                    rb.var(d1[spin], a, c, -factor);
                    p.add_row(rb.build(), 0.0);
                    report.contraction += 1;
                }
            }
        }
    }

    // Q and G maps: X_block(i,j) − f(D) = constant
    for (blk, dim, f) in layout.mapped_blocks() {
        for i in 0..dim {
            for j in i..dim {
                let e = f(i, j);
                let mut rb = RowBuilder::new();
                rb.var(blk, i, j, 1.0);
                for &(b, a, c, coef) in &e.terms {
                    rb.var(b, a, c, -coef);
                }
                p.add_row(rb.build(), e.constant);
            }
        }
        if blk == layout.g_same || blk == layout.g_ab || blk == layout.g_ba {
            report.g_map += tri(dim);
        } else {
            report.q_map += tri(dim);
        }
    }
    report.total_rows = p.rows.len();
    layout.report = report;
    (p, layout)
}

fn layout_add_same(l: &V2rdmLayout, e: &mut maps::Expr, spin: usize, a: (usize, usize), b: (usize, usize)) {
    if let (Some((x, sx)), Some((y, sy))) = (l.pairs.signed_index(a.0, a.1), l.pairs.signed_index(b.0, b.1)) {
        e.terms.push((l.d2_same[spin], x, y, sx * sy));
    }
}

/// `Tr(H ²D)` without the core energy, as coefficients on the variables.
pub(crate) fn energy_builder(layout: &V2rdmLayout, ints: &MolecularIntegrals) -> RowBuilder {
    let n = layout.n_orb;
    let mut rb = RowBuilder::new();
    for spin in 0..2 {
        for p in 0..n {
            for r in 0..n {
                rb.var(layout.d1[spin], p, r, ints.h1[(p, r)]);
            }
        }
    }
    let pairs = layout.pairs.pairs();
    for (x, &(p, q)) in pairs.iter().enumerate() {
        for (y, &(r, s)) in pairs.iter().enumerate() {
            let k = same_spin_coefficient(ints, p, q, r, s);
            rb.var(layout.d2_same[0], x, y, k);
            rb.var(layout.d2_same[1], x, y, k);
        }
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    rb.var(layout.d2_ab, p * n + q, r * n + s, ints.eri(p, r, q, s));
                }
            }
        }
    }
    rb
}

/// Cost row for `kind`. The trace norm of a PSD matrix is its trace, so
/// `trace_norm` weighs ²D diagonals as in the assembled spin-orbital trace
/// (value `η(η−1)` on any feasible point).
pub fn build_objective(layout: &V2rdmLayout, ints: &MolecularIntegrals, kind: ObjectiveKind) -> Row {
    let mut rb = match kind {
        ObjectiveKind::Energy | ObjectiveKind::EnergyMinusTrace => energy_builder(layout, ints),
        ObjectiveKind::TraceNorm => RowBuilder::new(),
    };
    if kind != ObjectiveKind::Energy {
        let sign = if kind == ObjectiveKind::TraceNorm { 1.0 } else { -1.0 };
        let np = layout.pairs.len();
        for x in 0..np {
            rb.var(layout.d2_same[0], x, x, 2.0 * sign);
            rb.var(layout.d2_same[1], x, x, 2.0 * sign);
        }
        for x in 0..layout.n_orb * layout.n_orb {
            rb.var(layout.d2_ab, x, x, 2.0 * sign);
        }
    }
    rb.build()
}

/// Reads the RDM blocks of a solution.
pub fn extract_rdms(layout: &V2rdmLayout, solution: &SdpSolution) -> Result<SpinBlockedRdms, V2rdmError> {
    if solution.status == SolverStatus::NumericalFailure {
        return Err(V2rdmError::NumericalFailure);
    }
    let dense = |b: usize| match solution.x.blocks.get(b) {
        Some(BlockData::Dense(m)) => Ok(m.clone()),
        _ => Err(V2rdmError::Shape(format!("block {b} missing from solution"))),
    };
    let mut r = SpinBlockedRdms {
        n_orb: layout.n_orb,
        n_alpha: layout.n_alpha,
        n_beta: layout.n_beta,
        d1_aa: dense(layout.d1[0])?,
        d1_bb: dense(layout.d1[1])?,
        d2_aa: dense(layout.d2_same[0])?,
        d2_bb: dense(layout.d2_same[1])?,
        d2_ab: dense(layout.d2_ab)?,
    };
    r.hermitize();
    Ok(r)
}

/// Primal point built from given RDMs: the mapped blocks are evaluated from
/// the RDMs and every slack is set from the row that owns it. A negative
/// slack means the RDMs violate that bound.
pub fn inject_rdms(problem: &SdpProblem, layout: &V2rdmLayout, rdms: &SpinBlockedRdms) -> Result<BlockVector, V2rdmError> {
    if (rdms.n_orb, rdms.n_alpha, rdms.n_beta) != (layout.n_orb, layout.n_alpha, layout.n_beta) {
        return Err(V2rdmError::Shape("RDMs do not match the layout".into()));
    }
    let mut x = BlockVector::zeros(&problem.blocks);
    let put = |x: &mut BlockVector, b: usize, m: &nalgebra::DMatrix<f64>| x.blocks[b] = BlockData::Dense(m.clone());
    put(&mut x, layout.d1[0], &rdms.d1_aa);
    put(&mut x, layout.d1[1], &rdms.d1_bb);
    put(&mut x, layout.d2_same[0], &rdms.d2_aa);
    put(&mut x, layout.d2_same[1], &rdms.d2_bb);
    put(&mut x, layout.d2_ab, &rdms.d2_ab);
    let mut values = Vec::new();
    for (blk, dim, f) in layout.mapped_blocks() {
        for i in 0..dim {
            for j in i..dim {
                values.push((blk, i, j, f(i, j).value(&x)));
            }
        }
    }
    for (b, i, j, v) in values {
        x.set(b, i, j, v);
    }
    let mut links = layout.slack_links.clone();
    links.sort_by_key(|l| l.row);
    for l in &links {
        let current = evaluate_row(problem, &problem.rows[l.row], &x);
        let own = l.coef * x.get(l.block, l.index, l.index);
        let v = (problem.b[l.row] - (current - own)) / l.coef;
        x.set(l.block, l.index, l.index, v);
    }
    Ok(x)
}
