use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{BlockData, BlockVector, Row, SdpProblem};

struct LowRankGroup {
    block: usize,
    // one distinct vector per column
    v: DMatrix<f64>,
    // (column, row, weight)
    uses: Vec<(usize, usize, f64)>,
}

/// The linear map `X ↦ (⟨A_k, X⟩)_k` of a subset of rows, laid out for fast
/// application of `A` and `Aᵀ`.
pub struct CompiledOperator {
    n_rows: usize,
    row_ptr: Vec<usize>,
    // (block, i, j, value) per sparse entry
    entries: Vec<(usize, usize, usize, f64)>,
    groups: Vec<LowRankGroup>,
    template: BlockVector,
}

impl CompiledOperator {
    /// Compiles `rows` of `problem` (in the given order).
    pub fn new(problem: &SdpProblem, rows: &[usize]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut entries = Vec::new();
        row_ptr.push(0);
        let mut by_block: HashMap<usize, (Vec<Vec<f64>>, HashMap<Vec<u64>, usize>, Vec<(usize, usize, f64)>)> =
            HashMap::new();
        for (k, &r) in rows.iter().enumerate() {
            let row = &problem.rows[r];
            entries.extend(row.entries.iter().map(|e| (e.block, e.i, e.j, e.value)));
            row_ptr.push(entries.len());
            for lr in &row.low_rank {
                let (vecs, index, uses) = by_block.entry(lr.block).or_default();
                let key: Vec<u64> = lr.v.iter().map(|x| x.to_bits()).collect();
                let col = *index.entry(key).or_insert_with(|| {
                    vecs.push(lr.v.clone());
                    vecs.len() - 1
                });
                uses.push((col, k, lr.weight));
            }
        }
        let mut groups: Vec<LowRankGroup> = by_block
            .into_iter()
            .map(|(block, (vecs, _, uses))| {
                let dim = problem.blocks[block].dim;
                let v = DMatrix::from_fn(dim, vecs.len(), |i, t| vecs[t][i]);
                LowRankGroup { block, v, uses }
            })
            .collect();
        groups.sort_by_key(|g| g.block);
        Self { n_rows: rows.len(), row_ptr, entries, groups, template: BlockVector::zeros(&problem.blocks) }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn zeros_like(&self) -> BlockVector {
        self.template.clone()
    }

    /// `A(X)`.
    pub fn apply(&self, x: &BlockVector) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(b, i, j, v) in &self.entries[self.row_ptr[k]..self.row_ptr[k + 1]] {
                let w = if i == j { 1.0 } else { 2.0 };
                acc += w * v * x.get(b, i, j);
            }
            *o = acc;
        }
        for g in &self.groups {
            let BlockData::Dense(xb) = &x.blocks[g.block] else { unreachable!("rank-one terms live on dense blocks") };
            let w = xb * &g.v;
            let quad: Vec<f64> = (0..g.v.ncols()).map(|t| g.v.column(t).dot(&w.column(t))).collect();
            for &(t, k, weight) in &g.uses {
                out[k] += weight * quad[t];
            }
        }
        out
    }

    /// `Aᵀ(y) = Σ_k y_k A_k`.
    pub fn adjoint(&self, y: &[f64]) -> BlockVector {
        let mut out = self.zeros_like();
        for (k, &yk) in y.iter().enumerate() {
            if yk == 0.0 {
                continue;
            }
            for &(b, i, j, v) in &self.entries[self.row_ptr[k]..self.row_ptr[k + 1]] {
                match &mut out.blocks[b] {
                    BlockData::Dense(m) => {
                        m[(i, j)] += yk * v;
                        if i != j {
                            m[(j, i)] += yk * v;
                        }
                    }
                    BlockData::Diag(d) => d[i] += yk * v,
                }
            }
        }
        for g in &self.groups {
            let mut s = DVector::zeros(g.v.ncols());
            for &(t, k, weight) in &g.uses {
                s[t] += y[k] * weight;
            }
            let mut scaled = g.v.clone();
            for (t, mut col) in scaled.column_iter_mut().enumerate() {
                col *= s[t];
            }
            let BlockData::Dense(m) = &mut out.blocks[g.block] else { unreachable!() };
            m.gemm(1.0, &scaled, &g.v.transpose(), 1.0);
        }
        out
    }

    /// `diag(A Aᵀ)`, exact including rank-one terms.
    pub fn normal_diagonal(&self, problem: &SdpProblem, rows: &[usize]) -> Vec<f64> {
        rows.iter()
            .map(|&r| {
                let row = &problem.rows[r];
                if row.low_rank.is_empty() {
                    row.sparse_norm_sqr()
                } else {
                    let m = row_matrix(problem, row);
                    m.dot(&m)
                }
            })
            .collect()
    }
}

/// Dense symmetric matrix of a row (or the cost).
pub fn row_matrix(problem: &SdpProblem, row: &Row) -> BlockVector {
    let mut out = BlockVector::zeros(&problem.blocks);
    for e in &row.entries {
        match &mut out.blocks[e.block] {
            BlockData::Dense(m) => {
                m[(e.i, e.j)] += e.value;
                if e.i != e.j {
                    m[(e.j, e.i)] += e.value;
                }
            }
            BlockData::Diag(d) => d[e.i] += e.value,
        }
    }
    for lr in &row.low_rank {
        if let BlockData::Dense(m) = &mut out.blocks[lr.block] {
            let v = DVector::from_column_slice(&lr.v);
            m.ger(lr.weight, &v, &v, 1.0);
        }
    }
    out
}
