mod common;

use common::{fock_state, gram, Op};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rdmshadow::fci::{
    compute_rdms, compute_rdms_complex, ground_state, hamiltonian_diagonal, rotate_state, sigma, BornSampler,
    FciVector,
};
use rdmshadow::linalg::{haar_unitary, hermitian_eigenvalues};
use rdmshadow::{energy_from_rdms, fixtures, PairBasis};

#[test]
fn ground_state_energies_match_reference() {
    for id in ["h2", "h4", "n2"] {
        let ints = fixtures::load(id).unwrap();
        let gs = ground_state(&ints).unwrap();
        let e = gs.energy.unwrap();
        let reference = fixtures::reference_energy(id).unwrap();
        assert!((e - reference).abs() < 1e-8, "{id}: {e} vs {reference}");

        let v: Vec<f64> = gs.amplitudes.iter().map(|z| z.re).collect();
        let hv = sigma(&ints, &v).unwrap();
        let res = hv.iter().zip(&v).map(|(h, x)| (h - e * x).powi(2)).sum::<f64>().sqrt();
        assert!(res < 1e-9, "{id}: residual {res}");

        let rdms = compute_rdms(&gs).unwrap();
        let e_rdm = energy_from_rdms(&ints, &rdms).unwrap();
        assert!((e_rdm - e).abs() < 1e-10, "{id}: {e_rdm} vs {e}");

        let diag = hamiltonian_diagonal(&ints).unwrap();
        assert!(e <= diag.iter().cloned().fold(f64::INFINITY, f64::min));
    }
}

#[test]
fn parsed_core_energy_is_nuclear_repulsion() {
    let ints = fixtures::load("h4").unwrap();
    assert_eq!((ints.n_orb, ints.n_alpha, ints.n_beta), (4, 2, 2));
    assert!((ints.e_core - 2.29310124732).abs() < 1e-9);
}

fn check_against_oracle(id: &str) {
    let ints = fixtures::load(id).unwrap();
    let gs = ground_state(&ints).unwrap();
    let rdms = compute_rdms(&gs).unwrap();
    let psi = fock_state(&gs);
    let n = ints.n_orb;
    let pb = PairBasis::new(n);
    let same = |off: usize| -> Vec<Vec<Op>> {
        pb.pairs().iter().map(|&(r, s)| vec![Op::Annihilate(off + s), Op::Annihilate(off + r)]).collect()
    };
    let ab: Vec<Vec<Op>> = (0..n * n).map(|x| vec![Op::Annihilate(n + x % n), Op::Annihilate(x / n)]).collect();
    let d1 = |off: usize| -> Vec<Vec<Op>> { (0..n).map(|r| vec![Op::Annihilate(off + r)]).collect() };
    let pairs = [
        (&rdms.d2_aa, gram(&psi, &same(0))),
        (&rdms.d2_bb, gram(&psi, &same(n))),
        (&rdms.d2_ab, gram(&psi, &ab)),
        (&rdms.d1_aa, gram(&psi, &d1(0))),
        (&rdms.d1_bb, gram(&psi, &d1(n))),
    ];
    for (k, (got, want)) in pairs.iter().enumerate() {
        let err = (*got - want).amax();
        assert!(err < 1e-10, "{id} block {k}: {err}");
    }
}

#[test]
fn rdms_match_brute_force_operators() {
    check_against_oracle("h2");
    check_against_oracle("h4");
}

#[test]
fn rdm_invariants_h4_and_n2() {
    for id in ["h4", "n2"] {
        let ints = fixtures::load(id).unwrap();
        let rdms = compute_rdms(&ground_state(&ints).unwrap()).unwrap();
        let eta = ints.eta() as f64;
        assert!((rdms.total_trace() - eta * (eta - 1.0)).abs() < 1e-9);
        assert!((rdms.d1_aa.trace() - ints.n_alpha as f64).abs() < 1e-10);
        assert!((rdms.d1_bb.trace() - ints.n_beta as f64).abs() < 1e-10);
        assert!(rdms.min_d2_eigenvalue() > -1e-10);
        assert!(rdms.max_hermiticity_defect() < 1e-12);
        let mut contracted = rdms.clone();
        contracted.contract_to_d1();
        assert!((&contracted.d1_aa - &rdms.d1_aa).amax() < 1e-10);
        assert!((&contracted.d1_bb - &rdms.d1_bb).amax() < 1e-10);
    }
}

#[test]
fn rotation_covariance_h4() {
    let ints = fixtures::load("h4").unwrap();
    let gs = ground_state(&ints).unwrap();
    let before = compute_rdms_complex(&gs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ua = haar_unitary(4, &mut rng);
    let ub = haar_unitary(4, &mut rng);
    let rotated = rotate_state(&gs, &ua, &ub).unwrap();
    assert!((rotated.norm_sqr() - 1.0).abs() < 1e-9);
    let after = compute_rdms_complex(&rotated).unwrap();
    let expect_a = ua.conjugate() * &before.d1_aa * ua.transpose();
    let expect_b = ub.conjugate() * &before.d1_bb * ub.transpose();
    assert!((&after.d1_aa - expect_a).map(|z| z.norm()).max() < 1e-9);
    assert!((&after.d1_bb - expect_b).map(|z| z.norm()).max() < 1e-9);
    for (x, y) in [(&before.d2_aa, &after.d2_aa), (&before.d2_bb, &after.d2_bb), (&before.d2_ab, &after.d2_ab)] {
        let ex = hermitian_eigenvalues(x);
        let ey = hermitian_eigenvalues(y);
        for (a, b) in ex.iter().zip(&ey) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

/// Upper 0.001 quantile of chi-square via the Wilson–Hilferty approximation.
fn chi2_crit_0001(k: f64) -> f64 {
    let z = 3.090232306167813;
    k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)
}

#[test]
fn born_sampling_chi_square_h4() {
    let ints = fixtures::load("h4").unwrap();
    let gs = ground_state(&ints).unwrap();
    let sampler = BornSampler::new(&gs);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 100_000;
    let sp = &gs.space;
    let mut counts = vec![0usize; sp.dim()];
    let mut occ = vec![0.0; 4];
    for _ in 0..draws {
        let o = sampler.sample(&mut rng);
        assert_eq!((o.alpha.count_ones(), o.beta.count_ones()), (2, 2));
        let k = sp.index(sp.alpha.position(o.alpha).unwrap(), sp.beta.position(o.beta).unwrap());
        counts[k] += 1;
        for (p, x) in occ.iter_mut().enumerate() {
            *x += (o.alpha >> p & 1) as f64;
        }
    }
    // pool bins with small expectation into one
    let mut stat = 0.0;
    let mut bins = 0;
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (k, &c) in counts.iter().enumerate() {
        let e = gs.amplitudes[k].norm_sqr() * draws as f64;
        if e < 5.0 {
            pool_obs += c as f64;
            pool_exp += e;
        } else {
            stat += (c as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    if pool_exp > 0.0 {
        stat += (pool_obs - pool_exp).powi(2) / pool_exp.max(1e-12);
        bins += 1;
    }
    assert!(stat < chi2_crit_0001((bins - 1) as f64), "chi2 {stat} over {bins} bins");

    let d1 = compute_rdms(&gs).unwrap().d1_aa;
    for (p, x) in occ.iter().enumerate() {
        let mean = x / draws as f64;
        let want = d1[(p, p)];
        let se = (want * (1.0 - want) / draws as f64).sqrt();
        assert!((mean - want).abs() < 5.0 * se + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rotation_preserves_norm_and_traces(seed in any::<u64>()) {
        let ints = fixtures::load("h4").unwrap();
        let gs = ground_state(&ints).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ua = haar_unitary(4, &mut rng);
        let ub = haar_unitary(4, &mut rng);
        let r = rotate_state(&gs, &ua, &ub).unwrap();
        prop_assert!((r.norm_sqr() - 1.0).abs() < 1e-9);
        let rd = compute_rdms_complex(&r).unwrap();
        prop_assert!((rd.total_trace().re - 12.0).abs() < 1e-9);
        prop_assert!(rd.max_hermiticity_defect() < 1e-12);
    }

    #[test]
    fn composed_rotations_compose(seed in any::<u64>()) {
        let ints = fixtures::load("h2").unwrap();
        let gs = ground_state(&ints).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u1, u2) = (haar_unitary(2, &mut rng), haar_unitary(2, &mut rng));
        let id: DMatrix<Complex64> = DMatrix::identity(2, 2);
        let two = rotate_state(&rotate_state(&gs, &u1, &id).unwrap(), &u2, &id).unwrap();
        let once = rotate_state(&gs, &(&u2 * &u1), &id).unwrap();
        for (a, b) in two.amplitudes.iter().zip(&once.amplitudes) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn single_determinant_is_unchanged_by_diagonal_phases() {
    let sp = rdmshadow::fci::enumerate_space(3, 1, 1).unwrap();
    let st = FciVector::determinant(sp, 0b010, 0b100).unwrap();
    let ph = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(3, |i, _| Complex64::from_polar(1.0, i as f64)));
    let r = rotate_state(&st, &ph, &ph).unwrap();
    let a = r.amplitude(0b010, 0b100);
    assert!((a - Complex64::from_polar(1.0, 3.0)).norm() < 1e-14);
}
