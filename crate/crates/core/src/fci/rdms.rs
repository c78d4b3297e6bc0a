use nalgebra::DMatrix;
use num_complex::Complex64;

use super::strings::{parity, StringSet};
use super::{FciError, FciVector};
use crate::rdm::{ComplexRdms, PairBasis, SpinBlockedRdms};

/// Real part of [`compute_rdms_complex`], hermitized.
pub fn compute_rdms(state: &FciVector) -> Result<SpinBlockedRdms, FciError> {
    let mut out = compute_rdms_complex(state)?.real_part();
    out.hermitize();
    Ok(out)
}

/// Full complex RDMs `²D^{pq,rs} = ⟨φ_pq|φ_rs⟩` with `φ_rs = a_s a_r |ψ⟩`.
///
/// Each block is the Gram matrix of a set of annihilated vectors, so the
/// results are Hermitian and PSD by construction.
pub fn compute_rdms_complex(state: &FciVector) -> Result<ComplexRdms, FciError> {
    state.check_normalized(1e-10)?;
    let sp = &state.space;
    let n = sp.n_orb;
    let (na, nb) = (sp.n_alpha, sp.n_beta);
    let pb = PairBasis::new(n);
    let mut out = ComplexRdms::zeros(n, na, nb);
    let c = &state.amplitudes;
    let nbs = sp.beta.len();

    // single annihilation, alpha
    if na >= 1 {
        let tgt = StringSet::new(n, na - 1);
        let mut phi = DMatrix::<Complex64>::zeros(tgt.len() * nbs, n);
        for (ia, &sa) in sp.alpha.strings().iter().enumerate() {
            for r in occ_iter(sa) {
                let ja = tgt.position(sa & !(1 << r)).expect("popcount");
                let s = parity(sa, r);
                for ib in 0..nbs {
                    phi[(ja * nbs + ib, r)] += c[ia * nbs + ib] * s;
                }
            }
        }
        out.d1_aa = phi.adjoint() * phi;
    }
    if nb >= 1 {
        let tgt = StringSet::new(n, nb - 1);
        let nt = tgt.len();
        let sa_sign = if na % 2 == 0 { 1.0 } else { -1.0 };
        let mut phi = DMatrix::<Complex64>::zeros(sp.alpha.len() * nt, n);
        for (ib, &sb) in sp.beta.strings().iter().enumerate() {
            for r in occ_iter(sb) {
                let jb = tgt.position(sb & !(1 << r)).expect("popcount");
                let s = sa_sign * parity(sb, r);
                for ia in 0..sp.alpha.len() {
                    phi[(ia * nt + jb, r)] += c[ia * nbs + ib] * s;
                }
            }
        }
        out.d1_bb = phi.adjoint() * phi;
    }
    // same-spin pairs
    if na >= 2 && !pb.is_empty() {
        let tgt = StringSet::new(n, na - 2);
        let mut phi = DMatrix::<Complex64>::zeros(tgt.len() * nbs, pb.len());
        for (ia, &sa) in sp.alpha.strings().iter().enumerate() {
            for (ja, x, s) in double_annihilations(&tgt, &pb, sa) {
                for ib in 0..nbs {
                    phi[(ja * nbs + ib, x)] += c[ia * nbs + ib] * s;
                }
            }
        }
        out.d2_aa = phi.adjoint() * phi;
    }
    if nb >= 2 && !pb.is_empty() {
        let tgt = StringSet::new(n, nb - 2);
        let nt = tgt.len();
        let mut phi = DMatrix::<Complex64>::zeros(sp.alpha.len() * nt, pb.len());
        for (ib, &sb) in sp.beta.strings().iter().enumerate() {
            for (jb, x, s) in double_annihilations(&tgt, &pb, sb) {
                for ia in 0..sp.alpha.len() {
                    phi[(ia * nt + jb, x)] += c[ia * nbs + ib] * s;
                }
            }
        }
        out.d2_bb = phi.adjoint() * phi;
    }
    // opposite spin: φ_(r,s) = a_sβ a_rα |ψ⟩
    if na >= 1 && nb >= 1 {
        let ta = StringSet::new(n, na - 1);
        let tb = StringSet::new(n, nb - 1);
        let ntb = tb.len();
        let beta_sign = if (na - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let mut phi = DMatrix::<Complex64>::zeros(ta.len() * ntb, n * n);
        for (ia, &sa) in sp.alpha.strings().iter().enumerate() {
            for r in occ_iter(sa) {
                let ja = ta.position(sa & !(1 << r)).expect("popcount");
                let s_a = parity(sa, r);
                for (ib, &sb) in sp.beta.strings().iter().enumerate() {
                    let amp = c[ia * nbs + ib];
                    for s in occ_iter(sb) {
                        let jb = tb.position(sb & !(1 << s)).expect("popcount");
                        let sign = s_a * beta_sign * parity(sb, s);
                        phi[(ja * ntb + jb, r * n + s)] += amp * sign;
                    }
                }
            }
        }
        out.d2_ab = phi.adjoint() * phi;
    }
    Ok(out)
}

fn occ_iter(bits: u64) -> impl Iterator<Item = usize> {
    let mut b = bits;
    std::iter::from_fn(move || {
        if b == 0 {
            return None;
        }
        let i = b.trailing_zeros() as usize;
        b &= b - 1;
        Some(i)
    })
}

/// `(target, pair index of r<s, sign)` for every `a_s a_r |bits⟩ ≠ 0` with `r < s`.
fn double_annihilations(tgt: &StringSet, pb: &PairBasis, bits: u64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for r in occ_iter(bits) {
        let b1 = bits & !(1 << r);
        let s1 = parity(bits, r);
        for s in occ_iter(b1).filter(|&s| s > r) {
            let b2 = b1 & !(1 << s);
            out.push((tgt.position(b2).expect("popcount"), pb.index(r, s), s1 * parity(b1, s)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fci::{enumerate_space, ground_state};

    #[test]
    fn single_orbital_pair() {
        let sp = enumerate_space(1, 1, 1).unwrap();
        let st = FciVector::determinant(sp, 1, 1).unwrap();
        let r = compute_rdms(&st).unwrap();
        assert_eq!(r.d2_ab[(0, 0)], 1.0);
        assert_eq!(r.d2_aa.len(), 0);
        assert_eq!(r.d1_aa[(0, 0)], 1.0);
    }

    #[test]
    fn h4_traces_and_energy() {
        let ints = crate::fixtures::load("h4").unwrap();
        let gs = ground_state(&ints).unwrap();
        let r = compute_rdms(&gs).unwrap();
        assert!((r.total_trace() - 12.0).abs() < 1e-10);
        assert!((r.d1_aa.trace() - 2.0).abs() < 1e-12);
        let e = crate::integrals::energy_from_rdms(&ints, &r).unwrap();
        assert!((e - gs.energy.unwrap()).abs() < 1e-10);
    }
}
