use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};

use super::{Row, SdpError, SdpProblem};

/// Largest number of rows without a private coordinate that get a dense rank check.
const DENSE_CHECK_CAP: usize = 4000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSelection {
    pub keep: Vec<usize>,
    pub dropped: Vec<usize>,
}

/// Finds a maximal linearly independent subset of rows.
///
/// A row owning a coordinate that no other remaining row touches cannot take
/// part in a dependency, so such rows are peeled off repeatedly. Only the
/// rows left over go through an incremental Cholesky factorization of their
/// Gram matrix. Dropped rows must have a right-hand side consistent with the
/// rows they depend on.
pub fn independent_rows(problem: &SdpProblem) -> Result<RowSelection, SdpError> {
    let low_rank_blocks: HashSet<usize> =
        problem.rows.iter().flat_map(|r| r.low_rank.iter().map(|l| l.block)).collect();
    let mut uses: HashMap<(usize, usize, usize), u32> = HashMap::new();
    for r in &problem.rows {
        for e in &r.entries {
            *uses.entry((e.block, e.i, e.j)).or_insert(0) += 1;
        }
    }
    let private = |r: &Row, uses: &HashMap<(usize, usize, usize), u32>| {
        r.entries.iter().any(|e| uses[&(e.block, e.i, e.j)] == 1 && !low_rank_blocks.contains(&e.block))
    };
    let mut removed = vec![false; problem.rows.len()];
    let mut keep = Vec::new();
    let mut candidates: Vec<usize> = (0..problem.rows.len()).collect();
    loop {
        let peel: Vec<usize> = candidates.iter().copied().filter(|&k| private(&problem.rows[k], &uses)).collect();
        if peel.is_empty() {
            break;
        }
        for &k in &peel {
            removed[k] = true;
            for e in &problem.rows[k].entries {
                *uses.get_mut(&(e.block, e.i, e.j)).unwrap() -= 1;
            }
        }
        keep.extend(peel);
        candidates.retain(|&k| !removed[k]);
    }
    let shared = candidates;
    if shared.len() > DENSE_CHECK_CAP {
        log::warn!("{} rows exceed the dense rank-check cap; assuming independence", shared.len());
        keep.extend(shared);
        keep.sort_unstable();
        return Ok(RowSelection { keep, dropped: vec![] });
    }

    let vecs: Vec<HashMap<(usize, usize, usize), f64>> = shared.iter().map(|&k| expand(problem, &problem.rows[k])).collect();
    let dot = |a: &HashMap<(usize, usize, usize), f64>, b: &HashMap<(usize, usize, usize), f64>| -> f64 {
        let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        small.iter().filter_map(|(k, v)| large.get(k).map(|w| v * w)).sum()
    };

    let mut kept: Vec<usize> = Vec::new();
    let mut l = DMatrix::<f64>::zeros(0, 0);
    let mut dropped = Vec::new();
    for (pos, &k) in shared.iter().enumerate() {
        let gkk = dot(&vecs[pos], &vecs[pos]);
        if gkk == 0.0 {
            if problem.b[k].abs() > 1e-10 {
                return Err(SdpError::InconsistentRows { row: k, residual: problem.b[k].abs() });
            }
            dropped.push(k);
            continue;
        }
        let g = DVector::from_iterator(kept.len(), kept.iter().map(|&p| dot(&vecs[p], &vecs[pos])));
        let coef = if kept.is_empty() {
            DVector::zeros(0)
        } else {
            l.solve_lower_triangular(&g).ok_or(SdpError::NormalSystem)?
        };
        let resid = gkk - coef.norm_squared();
        if resid > 1e-10 * gkk {
            let m = kept.len();
            let mut grown = DMatrix::zeros(m + 1, m + 1);
            grown.view_mut((0, 0), (m, m)).copy_from(&l);
            for j in 0..m {
                grown[(m, j)] = coef[j];
            }
            grown[(m, m)] = resid.sqrt();
            l = grown;
            kept.push(pos);
        } else {
            // A_k = Σ α_j A_j with Lᵀ α = coef
            let alpha = l.transpose().solve_upper_triangular(&coef).ok_or(SdpError::NormalSystem)?;
            let implied: f64 = kept.iter().zip(alpha.iter()).map(|(&p, a)| a * problem.b[shared[p]]).sum();
            let residual = (implied - problem.b[k]).abs();
            if residual > 1e-8 * (1.0 + problem.b[k].abs()) {
                return Err(SdpError::InconsistentRows { row: k, residual });
            }
            dropped.push(k);
        }
    }
    keep.extend(kept.iter().map(|&p| shared[p]));
    keep.sort_unstable();
    Ok(RowSelection { keep, dropped })
}

/// Row as a vector in the orthonormal symmetric-matrix coordinates.
fn expand(problem: &SdpProblem, row: &Row) -> HashMap<(usize, usize, usize), f64> {
    let mut out: HashMap<(usize, usize, usize), f64> = HashMap::new();
    let mut push = |b: usize, i: usize, j: usize, v: f64| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        *out.entry((b, i, j)).or_insert(0.0) += v;
    };
    for e in &row.entries {
        push(e.block, e.i, e.j, e.value);
    }
    for lr in &row.low_rank {
        let n = problem.blocks[lr.block].dim;
        for i in 0..n {
            for j in i..n {
                push(lr.block, i, j, lr.weight * lr.v[i] * lr.v[j]);
            }
        }
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    out.into_iter().map(|((b, i, j), v)| ((b, i, j), if i == j { v } else { sqrt2 * v })).collect()
}
