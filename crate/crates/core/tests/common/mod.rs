//! Brute-force Fock-space operators used as an independent oracle.
//!
//! Spin orbital `i < n` is alpha orbital `i`, `n + i` is beta orbital `i`.
//! Jordan–Wigner ordering follows the bit index, so a determinant is
//! `Π_{i ascending} a†_i |0⟩`.

#![allow(dead_code)]

pub mod kkt;
pub mod oracle;

use std::collections::HashMap;

use nalgebra::DMatrix;
use rdmshadow::fci::FciVector;

#[derive(Clone, Copy, Debug)]
pub enum Op {
    Create(usize),
    Annihilate(usize),
}

/// Applies `ops` right-to-left (the last entry acts first).
pub fn apply(ops: &[Op], bits: u64) -> Option<(f64, u64)> {
    let mut b = bits;
    let mut sign = 1.0;
    for op in ops.iter().rev() {
        let (m, create) = match *op {
            Op::Create(m) => (m, true),
            Op::Annihilate(m) => (m, false),
        };
        let occ = b >> m & 1 == 1;
        if occ == create {
            return None;
        }
        if (b & ((1u64 << m) - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        b ^= 1u64 << m;
    }
    Some((sign, b))
}

/// A real state as a sparse map over spin-orbital bitstrings.
pub fn fock_state(state: &FciVector) -> HashMap<u64, f64> {
    let sp = &state.space;
    let n = sp.n_orb;
    let mut out = HashMap::new();
    for (ia, &a) in sp.alpha.strings().iter().enumerate() {
        for (ib, &b) in sp.beta.strings().iter().enumerate() {
            let amp = state.amplitudes[sp.index(ia, ib)];
            assert!(amp.im.abs() < 1e-14, "oracle handles real states only");
            if amp.re != 0.0 {
                out.insert(a | b << n, amp.re);
            }
        }
    }
    out
}

/// Gram matrix `G[x, y] = ⟨O_x ψ | O_y ψ⟩` of operator strings applied to `psi`.
pub fn gram(psi: &HashMap<u64, f64>, strings: &[Vec<Op>]) -> DMatrix<f64> {
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(strings.len());
    for ops in strings {
        let mut col = Vec::new();
        for (&bits, &c) in psi {
            if let Some((s, t)) = apply(ops, bits) {
                let next = index.len();
                let k = *index.entry(t).or_insert(next);
                col.push((k, s * c));
            }
        }
        cols.push(col);
    }
    let mut dense = DMatrix::<f64>::zeros(index.len(), strings.len());
    for (j, col) in cols.iter().enumerate() {
        for &(k, v) in col {
            dense[(k, j)] += v;
        }
    }
    dense.transpose() * dense
}

/// `⟨ψ| ops |ψ⟩` for a single operator string.
pub fn expectation(psi: &HashMap<u64, f64>, ops: &[Op]) -> f64 {
    psi.iter()
        .filter_map(|(&bits, &c)| apply(ops, bits).map(|(s, t)| s * c * psi.get(&t).copied().unwrap_or(0.0)))
        .sum()
}
