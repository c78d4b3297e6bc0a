//! Spin-blocked reduced density matrices.
//!
//! Convention: `²D^{pq,rs} = <a†_p a†_q a_s a_r>` and `¹D^{pr} = <a†_p a_r>`.
//! Same-spin geminal blocks are indexed by ordered pairs `p < q` (see
//! [`PairBasis`]); the alpha-beta block uses the full grid `p * n + q` with
//! `p` an alpha and `q` a beta orbital.
//!
//! The assembled spin-orbital form orders spin orbitals as all alpha orbitals
//! followed by all beta orbitals and keeps every ordering of a same-spin pair,
//! so its trace is `η(η−1)`.

use nalgebra::{ComplexField, DMatrix, Scalar};
use num_complex::Complex64;

/// Ordered pairs `p < q` of `n` modes, laid out lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairBasis {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairBasis {
    pub fn new(n: usize) -> Self {
        let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for p in 0..n {
            for q in p + 1..n {
                pairs.push((p, q));
            }
        }
        Self { n, pairs }
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Index of the ordered pair `p < q`.
    pub fn index(&self, p: usize, q: usize) -> usize {
        debug_assert!(p < q && q < self.n);
        p * self.n - p * (p + 1) / 2 + (q - p - 1)
    }

    /// Index and antisymmetry sign for an arbitrary pair, `None` when `p == q`.
    pub fn signed_index(&self, p: usize, q: usize) -> Option<(usize, f64)> {
        match p.cmp(&q) {
            std::cmp::Ordering::Less => Some((self.index(p, q), 1.0)),
            std::cmp::Ordering::Greater => Some((self.index(q, p), -1.0)),
            std::cmp::Ordering::Equal => None,
        }
    }
}

/// 1- and 2-RDMs split into spin blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Rdms<T: Scalar> {
    pub n_orb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub d1_aa: DMatrix<T>,
    pub d1_bb: DMatrix<T>,
    pub d2_aa: DMatrix<T>,
    pub d2_bb: DMatrix<T>,
    pub d2_ab: DMatrix<T>,
}

/// Real symmetric RDMs, the form used by the optimizer.
pub type SpinBlockedRdms = Rdms<f64>;
/// Hermitian RDMs of states with complex amplitudes.
pub type ComplexRdms = Rdms<Complex64>;

impl<T: ComplexField<RealField = f64>> Rdms<T> {
    pub fn zeros(n_orb: usize, n_alpha: usize, n_beta: usize) -> Self {
        let ng = n_orb * n_orb.saturating_sub(1) / 2;
        Self {
            n_orb,
            n_alpha,
            n_beta,
            d1_aa: DMatrix::zeros(n_orb, n_orb),
            d1_bb: DMatrix::zeros(n_orb, n_orb),
            d2_aa: DMatrix::zeros(ng, ng),
            d2_bb: DMatrix::zeros(ng, ng),
            d2_ab: DMatrix::zeros(n_orb * n_orb, n_orb * n_orb),
        }
    }

    pub fn eta(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    pub fn blocks(&self) -> [&DMatrix<T>; 5] {
        [&self.d1_aa, &self.d1_bb, &self.d2_aa, &self.d2_bb, &self.d2_ab]
    }

    /// Largest `|M − M†|` over all blocks.
    pub fn max_hermiticity_defect(&self) -> f64 {
        self.blocks()
            .iter()
            .map(|m| {
                let adj = m.adjoint();
                (*m - &adj)
                    .iter()
                    .map(|z| z.clone().modulus())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Replaces every block by `(M + M†) / 2`.
    pub fn hermitize(&mut self) {
        for m in [
            &mut self.d1_aa,
            &mut self.d1_bb,
            &mut self.d2_aa,
            &mut self.d2_bb,
            &mut self.d2_ab,
        ] {
            let adj = m.adjoint();
            *m = (&*m + adj) * T::from_subset(&0.5);
        }
    }

    /// Total trace of the assembled spin-orbital 2-RDM, `η(η−1)` for a physical state.
    pub fn total_trace(&self) -> T {
        let two = T::from_subset(&2.0);
        (self.d2_aa.trace() + self.d2_bb.trace() + self.d2_ab.trace()) * two
    }

    /// Assembled spin-orbital 2-RDM as a `(2n)² × (2n)²` matrix indexed by `i * 2n + j`.
    pub fn assembled_d2(&self) -> DMatrix<T> {
        let n = self.n_orb;
        let m = 2 * n;
        let pb = PairBasis::new(n);
        let mut out = DMatrix::zeros(m * m, m * m);
        let ab = |p: usize, q: usize| p * n + q;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let (si, sj, sk, sl) = (i >= n, j >= n, k >= n, l >= n);
                        let (pi, pj, pk, pl) = (i % n, j % n, k % n, l % n);
                        let v = if si == sj && sk == sl && si == sk {
                            let blk = if si { &self.d2_bb } else { &self.d2_aa };
                            match (pb.signed_index(pi, pj), pb.signed_index(pk, pl)) {
                                (Some((x, sx)), Some((y, sy))) => {
                                    blk[(x, y)].clone() * T::from_subset(&(sx * sy))
                                }
                                _ => continue,
                            }
                        } else if si != sj && sk != sl {
                            // fold each pair to (alpha, beta) order, tracking the sign
                            let (a1, b1, s1) = if !si { (pi, pj, 1.0) } else { (pj, pi, -1.0) };
                            let (a2, b2, s2) = if !sk { (pk, pl, 1.0) } else { (pl, pk, -1.0) };
                            self.d2_ab[(ab(a1, b1), ab(a2, b2))].clone() * T::from_subset(&(s1 * s2))
                        } else {
                            continue;
                        };
                        out[(i * m + j, k * m + l)] = v;
                    }
                }
            }
        }
        out
    }

    /// Assembled spin-orbital 1-RDM (`2n × 2n`, block diagonal).
    pub fn assembled_d1(&self) -> DMatrix<T> {
        let n = self.n_orb;
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(&self.d1_aa);
        out.view_mut((n, n), (n, n)).copy_from(&self.d1_bb);
        out
    }
}

impl SpinBlockedRdms {
    /// Frobenius norm of the assembled spin-orbital 2-RDM difference.
    ///
    /// Each same-spin geminal entry appears four times in the assembled tensor
    /// and each alpha-beta entry four times (the αβ, βα and mixed orderings).
    pub fn d2_frobenius_distance(&self, other: &SpinBlockedRdms) -> f64 {
        let aa = (&self.d2_aa - &other.d2_aa).norm_squared();
        let bb = (&self.d2_bb - &other.d2_bb).norm_squared();
        let ab = (&self.d2_ab - &other.d2_ab).norm_squared();
        (4.0 * (aa + bb + ab)).sqrt()
    }

    /// Rebuilds both 1-RDMs from the 2-RDM blocks by partial trace.
    ///
    /// Uses `Σ_q ²D_{pq,rq} = (η−1) ¹D_{pr}` summed over both spins of `q`.
    pub fn contract_to_d1(&mut self) {
        let n = self.n_orb;
        let eta = self.eta();
        if eta < 2 {
            return;
        }
        let pb = PairBasis::new(n);
        let scale = 1.0 / (eta as f64 - 1.0);
        let mut outs = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
        for (spin, d2) in [&self.d2_aa, &self.d2_bb].into_iter().enumerate() {
            for p in 0..n {
                for r in 0..n {
                    let mut acc = 0.0;
                    for q in 0..n {
                        if let (Some((x, sx)), Some((y, sy))) =
                            (pb.signed_index(p, q), pb.signed_index(r, q))
                        {
                            acc += sx * sy * d2[(x, y)];
                        }
                        acc += if spin == 0 {
                            self.d2_ab[(p * n + q, r * n + q)]
                        } else {
                            self.d2_ab[(q * n + p, q * n + r)]
                        };
                    }
                    outs[spin][(p, r)] = acc * scale;
                }
            }
        }
        let [d1a, d1b] = outs;
        self.d1_aa = d1a;
        self.d1_bb = d1b;
    }

    /// Smallest eigenvalue over the three 2-RDM blocks.
    pub fn min_d2_eigenvalue(&self) -> f64 {
        [&self.d2_aa, &self.d2_bb, &self.d2_ab]
            .iter()
            .filter(|m| m.nrows() > 0)
            .map(|m| crate::linalg::min_symmetric_eigenvalue(m))
            .fold(f64::INFINITY, f64::min)
    }
}

impl ComplexRdms {
    /// Real part of every block.
    pub fn real_part(&self) -> SpinBlockedRdms {
        let re = |m: &DMatrix<Complex64>| m.map(|z| z.re);
        SpinBlockedRdms {
            n_orb: self.n_orb,
            n_alpha: self.n_alpha,
            n_beta: self.n_beta,
            d1_aa: re(&self.d1_aa),
            d1_bb: re(&self.d1_bb),
            d2_aa: re(&self.d2_aa),
            d2_bb: re(&self.d2_bb),
            d2_ab: re(&self.d2_ab),
        }
    }

    /// Largest imaginary part magnitude over all blocks.
    pub fn max_imag(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|m| m.iter().map(|z| z.im.abs()))
            .fold(0.0, f64::max)
    }
}
