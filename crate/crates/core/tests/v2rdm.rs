mod common;

use common::oracle::map_oracle_errors;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rdmshadow::fci::{compute_rdms, ground_state};
use rdmshadow::fixtures;
use rdmshadow::integrals::{energy_from_rdms, MolecularIntegrals};
use rdmshadow::sdp::{evaluate_row, solve_bpsdp, SolverOptions, SolverStatus};
use rdmshadow::shadow::{rotated_diagonal, sample_haar_rotation, DiagonalSample, OrbitalRotation};
use rdmshadow::v2rdm::{
    add_diagonal_constraints, add_energy_window, add_shadow_ball, build_nrep_problem, build_objective, extract_rdms,
    inject_rdms, ObjectiveKind,
};

fn check_maps_against_oracle(ints: &MolecularIntegrals) {
    for (name, err) in map_oracle_errors(ints) {
        assert!(err < 1e-10, "block {name} differs by {err}");
    }
}

#[test]
fn mapped_blocks_match_operator_oracle() {
    for id in ["h2", "h4", "n2"] {
        check_maps_against_oracle(&fixtures::load(id).unwrap());
    }
}

#[test]
fn one_orbital_pair_hole_entry() {
    let mut ints = MolecularIntegrals::zeros(1, 1, 1);
    ints.set_h1(0, 0, -1.0);
    check_maps_against_oracle(&ints);
    let gs = ground_state(&ints).unwrap();
    let r = compute_rdms(&gs).unwrap();
    let (p, layout) = build_nrep_problem(&ints);
    let x = inject_rdms(&p, &layout, &r).unwrap();
    let want = r.d2_ab[(0, 0)] - r.d1_aa[(0, 0)] - r.d1_bb[(0, 0)] + 1.0;
    assert!((x.get(layout.q2_ab, 0, 0) - want).abs() < 1e-14);
}

#[test]
fn fci_rdms_satisfy_every_row() {
    for id in ["h4", "n2"] {
        let ints = fixtures::load(id).unwrap();
        let r = compute_rdms(&ground_state(&ints).unwrap()).unwrap();
        let (p, layout) = build_nrep_problem(&ints);
        let x = inject_rdms(&p, &layout, &r).unwrap();
        for (k, row) in p.rows.iter().enumerate() {
            let v = evaluate_row(&p, row, &x);
            assert!((v - p.b[k]).abs() < 1e-10, "{id} row {k}: {v} vs {}", p.b[k]);
        }
        assert!(x.min_eigenvalue() > -1e-10);
    }
}

fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

#[test]
fn constraint_counts_follow_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 2..=5 {
        for m in 0..=3 {
            let ints = MolecularIntegrals::zeros(n, 1, 1);
            let (mut p, mut layout) = build_nrep_problem(&ints);
            let np = n * (n - 1) / 2;
            let nn = n * n;
            let base = &layout.report;
            assert_eq!(base.trace, 4);
            assert_eq!(base.contraction, 4 * tri(n));
            assert_eq!(base.q_map, 2 * tri(n) + 2 * tri(np) + tri(nn));
            assert_eq!(base.g_map, tri(2 * nn) + 2 * tri(nn));
            assert_eq!(base.total_rows, p.rows.len());

            let noisy = rdmshadow::SpinBlockedRdms::zeros(n, 1, 1);
            let ball = add_shadow_ball(&mut p, &mut layout, &noisy, 0.1).unwrap();
            assert_eq!(ball.shadow_ball, 2 * (2 * tri(np) + tri(nn)));
            assert_eq!(ball.shadow_ball_raw_tuples, 2 * (2 * n).pow(4));
            let samples: Vec<DiagonalSample> = (0..m)
                .map(|_| DiagonalSample {
                    rotation: sample_haar_rotation(n, &mut rng, true),
                    s_aa: vec![0.0; np],
                    s_bb: vec![0.0; np],
                    s_ab: vec![0.0; nn],
                })
                .collect();
            let diag = add_diagonal_constraints(&mut p, &mut layout, &samples, 0.1).unwrap();
            // one bound per spin-orbital pair: C(2n, 2) = 2·np + n²
            assert_eq!(diag.diagonal, 2 * m * (2 * n * (2 * n - 1) / 2));
            let win = add_energy_window(&mut p, &mut layout, &ints, 0.0, 1e-3).unwrap();
            assert_eq!(win.energy_window, 2);
            assert_eq!(layout.report.total_rows, p.rows.len());
            assert_eq!(layout.report.slack_blocks, 3);
            assert_eq!(layout.report.slack_variables, ball.shadow_ball + diag.diagonal + 2);
        }
    }
}

#[test]
fn small_ball_counts() {
    let ints = MolecularIntegrals::zeros(2, 1, 1);
    let (mut p, mut layout) = build_nrep_problem(&ints);
    let before = p.rows.len();
    add_shadow_ball(&mut p, &mut layout, &rdmshadow::SpinBlockedRdms::zeros(2, 1, 1), 1.0).unwrap();
    // αα and ββ: 1 element each; αβ: 10
    assert_eq!(p.rows.len() - before, 2 + 2 + 20);
    assert!(add_shadow_ball(&mut p, &mut layout, &rdmshadow::SpinBlockedRdms::zeros(2, 1, 1), 0.0).is_err());
}

#[test]
fn objectives_on_fci_rdms() {
    let ints = fixtures::load("h4").unwrap();
    let r = compute_rdms(&ground_state(&ints).unwrap()).unwrap();
    let (p, layout) = build_nrep_problem(&ints);
    let x = inject_rdms(&p, &layout, &r).unwrap();
    let e = evaluate_row(&p, &build_objective(&layout, &ints, ObjectiveKind::Energy), &x);
    assert!((e + ints.e_core - energy_from_rdms(&ints, &r).unwrap()).abs() < 1e-10);
    assert!((e + ints.e_core - fixtures::reference_energy("h4").unwrap()).abs() < 1e-8);
    let t = evaluate_row(&p, &build_objective(&layout, &ints, ObjectiveKind::TraceNorm), &x);
    assert!((t - 12.0).abs() < 1e-10);
    let d = evaluate_row(&p, &build_objective(&layout, &ints, ObjectiveKind::EnergyMinusTrace), &x);
    assert!((d - (e - t)).abs() < 1e-10);
}

#[test]
fn inject_extract_round_trip() {
    let ints = fixtures::load("h4").unwrap();
    let r = compute_rdms(&ground_state(&ints).unwrap()).unwrap();
    let (mut p, layout) = build_nrep_problem(&ints);
    p.c = build_objective(&layout, &ints, ObjectiveKind::Energy);
    let mut sol = solve_bpsdp(&p, &SolverOptions { max_iter: 1, ..Default::default() }).unwrap();
    sol.x = inject_rdms(&p, &layout, &r).unwrap();
    let back = extract_rdms(&layout, &sol).unwrap();
    assert_eq!(back, r);
    sol.status = SolverStatus::NumericalFailure;
    assert!(extract_rdms(&layout, &sol).is_err());
}

#[test]
fn exact_diagonals_are_feasible_for_the_truth() {
    let ints = fixtures::load("h4").unwrap();
    let gs = ground_state(&ints).unwrap();
    let r = compute_rdms(&gs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for rot in [OrbitalRotation::identity(ints.n_orb), sample_haar_rotation(ints.n_orb, &mut rng, true)] {
        let [s_aa, s_bb, s_ab] = rotated_diagonal(&gs, &rot).unwrap();
        let sample = DiagonalSample { rotation: rot, s_aa, s_bb, s_ab };
        let (mut p, mut layout) = build_nrep_problem(&ints);
        let before = p.rows.len();
        add_diagonal_constraints(&mut p, &mut layout, &[sample], 0.0).unwrap();
        let x = inject_rdms(&p, &layout, &r).unwrap();
        for k in before..p.rows.len() {
            assert!((evaluate_row(&p, &p.rows[k], &x) - p.b[k]).abs() < 1e-9);
        }
        // ε₂ = 0 gives one equality per pair and no slacks
        assert_eq!(p.rows.len() - before, 8 * 7 / 2);
        assert!(layout.slack_blocks.is_empty());
        assert_eq!(layout.report.slack_variables, 0);
    }
}

#[test]
fn identity_basis_pins_lab_diagonal() {
    let ints = fixtures::load("h2").unwrap();
    let gs = ground_state(&ints).unwrap();
    let [s_aa, s_bb, s_ab] = rotated_diagonal(&gs, &OrbitalRotation::identity(ints.n_orb)).unwrap();
    let (mut p, mut layout) = build_nrep_problem(&ints);
    p.c = build_objective(&layout, &ints, ObjectiveKind::TraceNorm);
    let sample = DiagonalSample { rotation: OrbitalRotation::identity(ints.n_orb), s_aa, s_bb, s_ab: s_ab.clone() };
    add_diagonal_constraints(&mut p, &mut layout, &[sample], 0.0).unwrap();
    let sol = solve_bpsdp(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolverStatus::Converged);
    let out = extract_rdms(&layout, &sol).unwrap();
    for (x, s) in s_ab.iter().enumerate() {
        assert!((out.d2_ab[(x, x)] - s).abs() < 1e-6);
    }
}

#[test]
fn plain_relaxation_bounds_fci_from_below() {
    for id in ["h2", "h4"] {
        let ints = fixtures::load(id).unwrap();
        let (mut p, layout) = build_nrep_problem(&ints);
        p.c = build_objective(&layout, &ints, ObjectiveKind::Energy);
        let sol = solve_bpsdp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Converged, "{id}");
        let r = extract_rdms(&layout, &sol).unwrap();
        let e = energy_from_rdms(&ints, &r).unwrap();
        let e_fci = fixtures::reference_energy(id).unwrap();
        assert!(e <= e_fci + 1e-6, "{id}: {e} vs {e_fci}");
        assert!(r.min_d2_eigenvalue() >= -1e-7);
        assert!((r.total_trace() - (ints.eta() * (ints.eta() - 1)) as f64).abs() < 1e-5);
        if id == "h2" {
            // two electrons: the D condition alone is exact
            assert!((e - e_fci).abs() < 1e-5, "{e} vs {e_fci}");
        }
    }
}
