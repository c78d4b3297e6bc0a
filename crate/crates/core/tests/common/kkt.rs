//! Random SDPs with a known optimum, built from a complementary primal-dual pair.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rdmshadow::sdp::{BlockData, BlockKind, BlockVector, RowBuilder, SdpProblem};

pub struct KktInstance {
    pub problem: SdpProblem,
    pub x_star: BlockVector,
    pub y_star: Vec<f64>,
    pub z_star: BlockVector,
    pub objective: f64,
}

fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    g.qr().q()
}

fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Instance with `n_blocks` dense blocks of size up to `max_dim`, one
/// diagonal block, and at most `max_rows` random rows.
///
/// Ranks and the row count are chosen inside the window where a generic
/// instance has a unique, strictly complementary, nondegenerate optimum:
/// `Σ t(r) + p ≤ m ≤ Σ (t(n) − t(n−r)) + p` with `t(k) = k(k+1)/2`.
pub fn instance<R: Rng>(rng: &mut R, n_blocks: usize, max_dim: usize, max_rows: usize) -> KktInstance {
    let dims: Vec<usize> = (0..n_blocks).map(|_| rng.random_range(2..=max_dim)).collect();
    let mut ranks: Vec<usize> = dims.iter().map(|&n| rng.random_range(1.max(n / 5)..=1.max(n / 3))).collect();
    let nd: usize = rng.random_range(1..=8);
    let pos = nd.div_ceil(2);
    let lower = |ranks: &[usize]| ranks.iter().map(|&r| tri(r)).sum::<usize>() + pos;
    let upper = |ranks: &[usize]| dims.iter().zip(ranks).map(|(&n, &r)| tri(n) - tri(n - r)).sum::<usize>() + pos;
    // keep the row count in the middle of the window
    while (lower(&ranks) + upper(&ranks)) / 2 > max_rows {
        let k = (0..ranks.len()).max_by_key(|&k| ranks[k]).unwrap();
        if ranks[k] == 1 {
            break;
        }
        ranks[k] -= 1;
    }
    let m = ((lower(&ranks) + upper(&ranks)) / 2).min(max_rows);

    let mut p = SdpProblem::new();
    let mut x_star = Vec::new();
    let mut z_star = Vec::new();
    for (k, (&n, &r)) in dims.iter().zip(&ranks).enumerate() {
        p.add_block(format!("x{k}"), BlockKind::Psd, n);
        let q = random_orthogonal(n, rng);
        let lx = DVector::from_fn(n, |i, _| if i < r { rng.random_range(0.5..2.0) } else { 0.0 });
        let lz = DVector::from_fn(n, |i, _| if i < r { 0.0 } else { rng.random_range(0.5..2.0) });
        x_star.push(BlockData::Dense(&q * DMatrix::from_diagonal(&lx) * q.transpose()));
        z_star.push(BlockData::Dense(&q * DMatrix::from_diagonal(&lz) * q.transpose()));
    }
    p.add_block("slack", BlockKind::Diag, nd);
    let xd = DVector::from_fn(nd, |i, _| if i % 2 == 0 { rng.random_range(0.5..2.0) } else { 0.0 });
    let zd = DVector::from_fn(nd, |i, _| if i % 2 == 1 { rng.random_range(0.5..2.0) } else { 0.0 });
    x_star.push(BlockData::Diag(xd));
    z_star.push(BlockData::Diag(zd));
    let x_star = BlockVector { blocks: x_star };
    let z_star = BlockVector { blocks: z_star };

    for _ in 0..m {
        let mut rb = RowBuilder::new();
        for (blk, spec) in p.blocks.iter().enumerate() {
            for i in 0..spec.dim {
                let js = if spec.kind == BlockKind::Diag { i..i + 1 } else { i..spec.dim };
                for j in js {
                    if rng.random_bool(0.2) {
                        rb.var(blk, i, j, StandardNormal.sample(rng));
                    }
                }
            }
        }
        p.add_row(rb.build(), 0.0);
    }
    for (k, row) in p.rows.iter().enumerate() {
        p.b[k] = row_value(row, &x_star);
    }
    let y_star: Vec<f64> = (0..p.rows.len()).map(|_| StandardNormal.sample(rng)).collect();
    // C = Aᵀy* + Z*, written as upper-triangle coefficients on the variables
    let mut c = z_star.clone();
    for (row, &yk) in p.rows.iter().zip(&y_star) {
        for e in &row.entries {
            match &mut c.blocks[e.block] {
                BlockData::Dense(mm) => {
                    mm[(e.i, e.j)] += yk * e.value;
                    if e.i != e.j {
                        mm[(e.j, e.i)] += yk * e.value;
                    }
                }
                BlockData::Diag(d) => d[e.i] += yk * e.value,
            }
        }
    }
    let mut cb = RowBuilder::new();
    for (blk, data) in c.blocks.iter().enumerate() {
        match data {
            BlockData::Dense(mm) => {
                for i in 0..mm.nrows() {
                    for j in i..mm.nrows() {
                        cb.var(blk, i, j, if i == j { mm[(i, j)] } else { 2.0 * mm[(i, j)] });
                    }
                }
            }
            BlockData::Diag(d) => {
                for i in 0..d.len() {
                    cb.var(blk, i, i, d[i]);
                }
            }
        }
    }
    p.c = cb.build();
    let objective = row_value(&p.c, &x_star);
    KktInstance { problem: p, x_star, y_star, z_star, objective }
}

pub fn row_value(row: &rdmshadow::sdp::Row, x: &BlockVector) -> f64 {
    row.entries.iter().map(|e| if e.i == e.j { 1.0 } else { 2.0 } * e.value * x.get(e.block, e.i, e.j)).sum()
}
