use nalgebra::DMatrix;
use rdmshadow::fci::{compute_rdms, ground_state};
use rdmshadow::integrals::MolecularIntegrals;
use rdmshadow::v2rdm::{build_nrep_problem, inject_rdms};

use super::{fock_state, gram, Op};

fn dense_block(x: &rdmshadow::sdp::BlockVector, b: usize, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| x.get(b, i, j))
}

/// Largest elementwise difference between each mapped block and its
/// brute-force Gram matrix, on the FCI state of `ints`.
pub fn map_oracle_errors(ints: &MolecularIntegrals) -> Vec<(String, f64)> {
    let gs = ground_state(ints).unwrap();
    let rdms = compute_rdms(&gs).unwrap();
    let (p, layout) = build_nrep_problem(ints);
    let x = inject_rdms(&p, &layout, &rdms).unwrap();
    let psi = fock_state(&gs);
    let n = ints.n_orb;
    let pairs = layout.pairs.pairs().to_vec();

    let q1 = |off: usize| -> Vec<Vec<Op>> { (0..n).map(|p| vec![Op::Create(off + p)]).collect() };
    let q2_same = |off: usize| -> Vec<Vec<Op>> {
        pairs.iter().map(|&(p, q)| vec![Op::Create(off + q), Op::Create(off + p)]).collect()
    };
    let q2_ab: Vec<Vec<Op>> = (0..n * n).map(|x| vec![Op::Create(n + x % n), Op::Create(x / n)]).collect();
    // ²G[(pq),(rs)] = <(a†_q a_p)ψ | (a†_s a_r)ψ>
    let g_same: Vec<Vec<Op>> = (0..2 * n * n)
        .map(|x| {
            let off = (x / (n * n)) * n;
            let (p, q) = ((x % (n * n)) / n, x % n);
            vec![Op::Create(off + q), Op::Annihilate(off + p)]
        })
        .collect();
    let g_ab: Vec<Vec<Op>> = (0..n * n).map(|x| vec![Op::Create(n + x % n), Op::Annihilate(x / n)]).collect();
    let g_ba: Vec<Vec<Op>> = (0..n * n).map(|x| vec![Op::Create(x % n), Op::Annihilate(n + x / n)]).collect();

    let cases = [
        (layout.q1[0], q1(0)),
        (layout.q1[1], q1(n)),
        (layout.q2_same[0], q2_same(0)),
        (layout.q2_same[1], q2_same(n)),
        (layout.q2_ab, q2_ab),
        (layout.g_same, g_same),
        (layout.g_ab, g_ab),
        (layout.g_ba, g_ba),
    ];
    cases
        .into_iter()
        .map(|(blk, strings)| {
            let want = gram(&psi, &strings);
            let got = dense_block(&x, blk, strings.len());
            (p.blocks[blk].name.clone(), (&got - &want).amax())
        })
        .collect()
}
