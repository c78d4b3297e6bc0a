use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rdmshadow::fci::{compute_rdms, ground_state};
use rdmshadow::fixtures;
use rdmshadow::shadow::{
    diagonal_measurements, gaussian_surrogate, match_basis_count, mean_pair_variance, rotated_diagonal,
    sample_haar_rotation, sample_shots, variance_bound,
};

#[test]
fn h4_shadow_mean_is_unbiased_at_moderate_budget() {
    let ints = fixtures::load("h4").unwrap();
    let gs = ground_state(&ints).unwrap();
    let truth = compute_rdms(&gs).unwrap();
    let acc = sample_shots(&gs, 20_000, 17, 1024).unwrap();
    let mean = acc.mean();
    let se = acc.standard_errors();
    let mut worst: f64 = 0.0;
    for (m, t, s) in [
        (&mean.d2_aa, &truth.d2_aa, &se.d2_aa),
        (&mean.d2_bb, &truth.d2_bb, &se.d2_bb),
        (&mean.d2_ab, &truth.d2_ab, &se.d2_ab),
        (&mean.d1_aa, &truth.d1_aa, &se.d1_aa),
    ] {
        for i in 0..m.len() {
            worst = worst.max((m[i] - t[i]).abs() / s[i].max(1e-12));
        }
    }
    assert!(worst < 5.0, "max z-score {worst}");
    assert!(acc.average_variance() <= 4.3393 * 1.05, "{}", acc.average_variance());
}

#[test]
fn surrogate_noise_has_requested_width() {
    let ints = fixtures::load("h4").unwrap();
    let truth = compute_rdms(&ground_state(&ints).unwrap()).unwrap();
    let shots = 10_000;
    let sigma2 = variance_bound(4, 8).unwrap() / shots as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let trials = 1000;
    let mut acc = 0.0;
    let mut count = 0;
    for _ in 0..trials {
        let (noisy, eps) = gaussian_surrogate(&truth, shots, &mut rng, 1.0).unwrap();
        assert!((eps * eps - sigma2).abs() < 1e-15);
        for j in 0..noisy.d2_ab.ncols() {
            for i in 0..=j {
                acc += (noisy.d2_ab[(i, j)] - truth.d2_ab[(i, j)]).powi(2);
                count += 1;
            }
        }
    }
    let var = acc / count as f64;
    assert!((var / sigma2 - 1.0).abs() < 0.1, "{var} vs {sigma2}");
}

#[test]
fn binomial_diagonals_follow_clt() {
    let ints = fixtures::load("h4").unwrap();
    let gs = ground_state(&ints).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rot = sample_haar_rotation(4, &mut rng, true);
    let exact = rotated_diagonal(&gs, &rot).unwrap();
    let shots = 100_000;
    let set = diagonal_measurements(&gs, std::slice::from_ref(&rot), Some(shots), &mut rng, 1.0).unwrap();
    let s = &set.samples[0];
    for (got, want) in [(&s.s_aa, &exact[0]), (&s.s_bb, &exact[1]), (&s.s_ab, &exact[2])] {
        for (g, w) in got.iter().zip(want) {
            let sd = (w * (1.0 - w) / shots as f64).sqrt();
            assert!((g - w).abs() <= 5.0 * sd + 1e-12, "{g} vs {w}");
        }
    }
}

#[test]
fn basis_count_fallback_is_stable() {
    let ints = fixtures::load("h4").unwrap();
    let gs = ground_state(&ints).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let m = match_basis_count(4, 2, 2, 8, Some(&gs), &mut rng).unwrap() as f64;
    let reference = variance_bound(4, 8).unwrap() / mean_pair_variance(&gs, 1000, &mut rng).unwrap();
    assert!(m <= 2.0 * reference && m >= reference / 2.0, "m={m}, reference {reference}");
}
