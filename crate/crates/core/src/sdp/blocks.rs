use nalgebra::{DMatrix, DVector};

use super::{BlockKind, BlockSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum BlockData {
    Dense(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl BlockData {
    pub fn dim(&self) -> usize {
        match self {
            BlockData::Dense(m) => m.nrows(),
            BlockData::Diag(v) => v.len(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            BlockData::Dense(m) => m[(i, j)],
            BlockData::Diag(v) => {
                if i == j {
                    v[i]
                } else {
                    0.0
                }
            }
        }
    }

    /// Smallest eigenvalue (smallest entry for diagonal blocks).
    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            BlockData::Dense(m) => crate::linalg::min_symmetric_eigenvalue(m),
            BlockData::Diag(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// One matrix per block of an [`super::SdpProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    pub blocks: Vec<BlockData>,
}

impl BlockVector {
    pub fn zeros(specs: &[BlockSpec]) -> Self {
        let blocks = specs
            .iter()
            .map(|s| match s.kind {
                BlockKind::Psd => BlockData::Dense(DMatrix::zeros(s.dim, s.dim)),
                BlockKind::Diag => BlockData::Diag(DVector::zeros(s.dim)),
            })
            .collect();
        Self { blocks }
    }

    pub fn matches(&self, specs: &[BlockSpec]) -> bool {
        self.blocks.len() == specs.len()
            && self.blocks.iter().zip(specs).all(|(b, s)| {
                b.dim() == s.dim && matches!((b, s.kind), (BlockData::Dense(_), BlockKind::Psd) | (BlockData::Diag(_), BlockKind::Diag))
            })
    }

    pub fn get(&self, block: usize, i: usize, j: usize) -> f64 {
        self.blocks[block].get(i, j)
    }

    /// Sets `X_ij` and `X_ji`.
    pub fn set(&mut self, block: usize, i: usize, j: usize, v: f64) {
        match &mut self.blocks[block] {
            BlockData::Dense(m) => {
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
            BlockData::Diag(d) => {
                assert_eq!(i, j, "off-diagonal write to a diagonal block");
                d[i] = v;
            }
        }
    }

    /// Trace inner product `Σ_b ⟨X_b, Y_b⟩`.
    pub fn dot(&self, other: &BlockVector) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| match (a, b) {
                (BlockData::Dense(x), BlockData::Dense(y)) => x.dot(y),
                (BlockData::Diag(x), BlockData::Diag(y)) => x.dot(y),
                _ => panic!("block kinds differ"),
            })
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &BlockVector) {
        for (x, y) in self.blocks.iter_mut().zip(&other.blocks) {
            match (x, y) {
                (BlockData::Dense(x), BlockData::Dense(y)) => x.zip_apply(y, |u, v| *u += a * v),
                (BlockData::Diag(x), BlockData::Diag(y)) => x.axpy(a, y, 1.0),
                _ => panic!("block kinds differ"),
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.blocks {
            match x {
                BlockData::Dense(m) => *m *= a,
                BlockData::Diag(v) => *v *= a,
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks.iter().map(BlockData::min_eigenvalue).fold(f64::INFINITY, f64::min)
    }
}
