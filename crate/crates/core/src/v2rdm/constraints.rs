use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{energy_builder, ConstraintReport, SlackLink, V2rdmError, V2rdmLayout};
use crate::integrals::MolecularIntegrals;
use crate::rdm::SpinBlockedRdms;
use crate::sdp::{BlockKind, RowBuilder, SdpProblem};
use crate::shadow::{compound_unchecked, DiagonalSample};

fn add_slack_block(problem: &mut SdpProblem, layout: &mut V2rdmLayout, name: &str, dim: usize) -> usize {
    let b = problem.add_block(name, BlockKind::Diag, dim);
    layout.slack_blocks.push(b);
    b
}

/// `value(row) ∈ [lo, hi]` as `row − φ₀ = lo`, `row + φ₁ = hi`.
fn push_interval(
    problem: &mut SdpProblem,
    layout: &mut V2rdmLayout,
    mut rb: RowBuilder,
    slack: usize,
    first: usize,
    lo: f64,
    hi: f64,
) {
    let mut upper = rb.clone();
    rb.var(slack, first, first, -1.0);
    let r = problem.add_row(rb.build(), lo);
    layout.slack_links.push(SlackLink { row: r, block: slack, index: first, coef: -1.0 });
    upper.var(slack, first + 1, first + 1, 1.0);
    let r = problem.add_row(upper.build(), hi);
    layout.slack_links.push(SlackLink { row: r, block: slack, index: first + 1, coef: 1.0 });
}

fn finish(problem: &SdpProblem, layout: &mut V2rdmLayout, mut report: ConstraintReport, rows_before: usize) -> ConstraintReport {
    report.total_rows = problem.rows.len() - rows_before;
    layout.report.merge(&report);
    report
}

/// Two-sided bound `|²D − noisy| ≤ ε₁` on every independent element of the
/// three 2-RDM blocks.
pub fn add_shadow_ball(
    problem: &mut SdpProblem,
    layout: &mut V2rdmLayout,
    noisy: &SpinBlockedRdms,
    epsilon1: f64,
) -> Result<ConstraintReport, V2rdmError> {
    if !(epsilon1 > 0.0) {
        return Err(V2rdmError::Epsilon(epsilon1));
    }
    if (noisy.n_orb, noisy.n_alpha, noisy.n_beta) != (layout.n_orb, layout.n_alpha, layout.n_beta) {
        return Err(V2rdmError::Shape("noisy RDMs do not match the layout".into()));
    }
    let rows_before = problem.rows.len();
    let targets = [(layout.d2_same[0], &noisy.d2_aa), (layout.d2_same[1], &noisy.d2_bb), (layout.d2_ab, &noisy.d2_ab)];
    let count: usize = targets.iter().map(|(_, m)| m.nrows() * (m.nrows() + 1) / 2).sum();
    let slack = add_slack_block(problem, layout, "shadow_slack", 2 * count);
    let mut t = 0;
    for (blk, m) in targets {
        for i in 0..m.nrows() {
            for j in i..m.nrows() {
                let mut rb = RowBuilder::new();
                rb.var(blk, i, j, 1.0);
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                push_interval(problem, layout, rb, slack, 2 * t, v - epsilon1, v + epsilon1);
                t += 1;
            }
        }
    }
    let n2 = (2 * layout.n_orb).pow(4);
    let report = ConstraintReport {
        shadow_ball: 2 * count,
        shadow_ball_raw_tuples: 2 * n2,
        slack_blocks: 1,
        slack_variables: 2 * count,
        ..Default::default()
    };
    Ok(finish(problem, layout, report, rows_before))
}

/// Adds `vᵀ ²D v` terms for each nonzero real and imaginary part of a kernel row.
fn add_kernel_row(rb: &mut RowBuilder, block: usize, row: &[Complex64]) {
    let re: Vec<f64> = row.iter().map(|z| z.re).collect();
    let im: Vec<f64> = row.iter().map(|z| z.im).collect();
    for v in [re, im] {
        if v.iter().any(|&x| x != 0.0) {
            rb.low_rank(block, 1.0, v);
        }
    }
}

fn kernel_rows(m: &DMatrix<Complex64>) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

/// Bounds `|X^{pq} − S^{pq}| ≤ ε₂` on the rotated pair occupations of each
/// basis, where `X = diag(K ²D K†)` and `K` is the pair kernel of the
/// rotation (second compound matrix for same-spin pairs, Kronecker product
/// for alpha-beta pairs).
///
/// Each bound is written as `X − φ₀ = S − ε₂` and `φ₀ + φ₁ = 2ε₂`, which
/// keeps the dense functional in one row per pair. With `ε₂ = 0` the bound
/// is the equality `X = S` and no slacks are added.
pub fn add_diagonal_constraints(
    problem: &mut SdpProblem,
    layout: &mut V2rdmLayout,
    samples: &[DiagonalSample],
    epsilon2: f64,
) -> Result<ConstraintReport, V2rdmError> {
    if !(epsilon2 >= 0.0) {
        return Err(V2rdmError::Epsilon(epsilon2));
    }
    let n = layout.n_orb;
    let np = layout.pairs.len();
    for (k, s) in samples.iter().enumerate() {
        if s.rotation.n_orb() != n || s.s_aa.len() != np || s.s_bb.len() != np || s.s_ab.len() != n * n {
            return Err(V2rdmError::Shape(format!("basis {k} does not match {n} orbitals")));
        }
    }
    let rows_before = problem.rows.len();
    let exact = epsilon2 == 0.0;
    let per_basis = 2 * np + n * n;
    let slack = if exact {
        None
    } else {
        Some(add_slack_block(problem, layout, "diagonal_slack", 2 * per_basis * samples.len()))
    };
    let mut t = 0;
    for s in samples {
        let ka = compound_unchecked(&s.rotation.u_alpha);
        let kb = compound_unchecked(&s.rotation.u_beta);
        let kab = s.rotation.u_alpha.kronecker(&s.rotation.u_beta);
        let sets = [(layout.d2_same[0], kernel_rows(&ka), &s.s_aa), (layout.d2_same[1], kernel_rows(&kb), &s.s_bb), (layout.d2_ab, kernel_rows(&kab), &s.s_ab)];
        for (blk, rows, target) in sets {
            for (row, &sv) in rows.iter().zip(target.iter()) {
                let mut rb = RowBuilder::new();
                add_kernel_row(&mut rb, blk, row);
                let Some(slack) = slack else {
                    problem.add_row(rb.build(), sv);
                    t += 1;
                    continue;
                };
                rb.var(slack, 2 * t, 2 * t, -1.0);
                let r = problem.add_row(rb.build(), sv - epsilon2);
                layout.slack_links.push(SlackLink { row: r, block: slack, index: 2 * t, coef: -1.0 });
                let mut rb = RowBuilder::new();
                rb.var(slack, 2 * t, 2 * t, 1.0).var(slack, 2 * t + 1, 2 * t + 1, 1.0);
                let r = problem.add_row(rb.build(), 2.0 * epsilon2);
                layout.slack_links.push(SlackLink { row: r, block: slack, index: 2 * t + 1, coef: 1.0 });
                t += 1;
            }
        }
    }
    let rows_per_bound = if exact { 1 } else { 2 };
    let report = ConstraintReport {
        diagonal: rows_per_bound * t,
        slack_blocks: usize::from(!exact),
        slack_variables: if exact { 0 } else { 2 * t },
        ..Default::default()
    };
    Ok(finish(problem, layout, report, rows_before))
}

/// `E_GS − ε ≤ E[²D] ≤ E_GS + ε`, with `e_gs` a total energy (core energy included).
pub fn add_energy_window(
    problem: &mut SdpProblem,
    layout: &mut V2rdmLayout,
    ints: &MolecularIntegrals,
    e_gs: f64,
    epsilon_gs: f64,
) -> Result<ConstraintReport, V2rdmError> {
    if !(epsilon_gs > 0.0) {
        return Err(V2rdmError::Epsilon(epsilon_gs));
    }
    let rows_before = problem.rows.len();
    let slack = add_slack_block(problem, layout, "energy_slack", 2);
    let rb = energy_builder(layout, ints);
    let target = e_gs - ints.e_core;
    push_interval(problem, layout, rb, slack, 0, target - epsilon_gs, target + epsilon_gs);
    let report = ConstraintReport { energy_window: 2, slack_blocks: 1, slack_variables: 2, ..Default::default() };
    Ok(finish(problem, layout, report, rows_before))
}
