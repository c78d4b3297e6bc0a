use rdmshadow::harness::{
    bias_report, bias_table, cost_comparison, improvement_factor, loglog_slope, median_curve, read_csv,
    run_sweep, simultaneous_z, independent_elements, write_csv, ExperimentConfig, HarnessError, Method, NoiseMode, SweepContext, SweepRecord,
};
use rdmshadow::integrals::energy_from_rdms;
use rdmshadow::sdp::SolverOptions;
use rdmshadow::shadow::variance_bound;
use rdmshadow::v2rdm::ObjectiveKind;

fn csv_without_time(records: &[SweepRecord]) -> String {
    let cleared: Vec<SweepRecord> = records.iter().cloned().map(|r| SweepRecord { wall_time_s: 0.0, ..r }).collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, &cleared).unwrap();
    String::from_utf8(buf).unwrap()
}

fn power_law(a: f64, budgets: &[f64]) -> Vec<(f64, f64)> {
    budgets.iter().map(|&s| (s, a / s.sqrt())).collect()
}

#[test]
fn identical_curves_give_unit_factor() {
    let c = power_law(2.0, &[1e4, 1e5, 1e6, 1e7]);
    for e in improvement_factor(&c, &c).unwrap() {
        assert!((e.factor - 1.0).abs() < 1e-12);
        assert!(!e.censored);
    }
}

#[test]
fn shifted_curve_gives_shift_factor() {
    let r = [(1e3, 0.9), (1e4, 0.5), (1e5, 0.2), (1e6, 0.05)];
    let n: Vec<(f64, f64)> = r.iter().map(|&(s, e)| (s / 10.0, e)).collect();
    for e in improvement_factor(&r, &n).unwrap() {
        assert!((e.factor - 10.0).abs() < 1e-9, "{e:?}");
    }
}

#[test]
fn power_law_prefactor_ratio_squares() {
    // a·s^(-1/2) = b·t^(-1/2) gives s/t = (a/b)², so a prefactor ratio of √15 is a factor 15
    let budgets = [1e4, 1e5, 1e6, 1e7, 1e8];
    let r = power_law(15f64.sqrt(), &budgets);
    let n = power_law(1.0, &budgets);
    let t = improvement_factor(&r, &n).unwrap();
    let uncensored: Vec<_> = t.iter().filter(|e| !e.censored).collect();
    assert!(uncensored.len() >= 3);
    for e in &uncensored {
        assert!((e.factor - 15.0).abs() < 1e-9, "{e:?}");
    }
    // levels below the reference range are extrapolated with the same power law
    assert!(t.iter().any(|e| e.censored));
    for e in &t {
        assert!((e.factor - 15.0).abs() < 1e-9);
    }
}

#[test]
fn disjoint_error_ranges_are_rejected() {
    let r = [(1.0, 1.0), (10.0, 0.5)];
    let n = [(1.0, 0.1), (10.0, 0.05)];
    assert!(matches!(improvement_factor(&r, &n), Err(HarnessError::NonOverlapping)));
    assert!(matches!(improvement_factor(&r[..1], &n), Err(HarnessError::ShortCurve(1))));
}

#[test]
fn slope_of_exact_power_law() {
    let pts = power_law(3.0, &[1e2, 1e3, 1e4, 1e5]);
    assert!((loglog_slope(&pts) + 0.5).abs() < 1e-12);
}

fn h2_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::new("h2", Method::ALL.to_vec(), vec![1_000, 100_000], vec![11, 12]);
    c.c2_bases = Some(3);
    c.solver = SolverOptions { tol: 1e-7, ..Default::default() };
    c.master_seed = 5;
    c.z = coverage_z(2);
    c
}

/// Ball multiplier covering every element of the truth with 95% probability.
fn coverage_z(n_orb: usize) -> f64 {
    simultaneous_z(independent_elements(n_orb), 0.05)
}

#[test]
fn sweep_records_are_consistent() {
    let ctx = SweepContext::load("h2").unwrap();
    let cfg = h2_config();
    let out = run_sweep(&ctx, &cfg).unwrap();
    assert!(out.failures.is_empty(), "{:?}", out.failures);
    assert_eq!(out.records.len(), 4 * 2 * 2);
    assert_eq!(out.m_bases, Some(3));
    for (r, d) in out.records.iter().zip(&out.rdms) {
        assert_eq!(r.energy_err, (r.energy_est - r.energy_fci).abs());
        assert!(r.rdm_frob_err >= 0.0);
        assert!((energy_from_rdms(&ctx.ints, d).unwrap() - r.energy_est).abs() <= 1e-9);
        assert!((r.rdm_frob_err - d.d2_frobenius_distance(&ctx.truth)).abs() <= 1e-12);
    }
    let plain: Vec<&SweepRecord> = out.records.iter().filter(|r| r.method == "v2rdm_plain").collect();
    assert!(plain.iter().all(|r| r.energy_est == plain[0].energy_est && r.rdm_frob_err == plain[0].rdm_frob_err));
    assert!(out.records.iter().filter(|r| r.method == "v2rdm_c2").all(|r| r.m_bases == 3));
}

#[test]
fn sweep_is_deterministic_and_schedule_independent() {
    let ctx = SweepContext::load("h2").unwrap();
    let mut cfg = h2_config();
    cfg.workers = 1;
    let a = run_sweep(&ctx, &cfg).unwrap();
    cfg.workers = 2;
    let b = run_sweep(&ctx, &cfg).unwrap();
    let text = csv_without_time(&a.records);
    assert_eq!(text, csv_without_time(&b.records));
    assert!(text.starts_with(
        "fixture,method,objective,shots,m_bases,seed,energy_est,energy_fci,energy_err,rdm_frob_err,solver_iters,solver_gap,wall_time_s\n"
    ));
    let back = read_csv(text.as_bytes()).unwrap();
    assert_eq!(csv_without_time(&back), text);

    cfg.master_seed += 1;
    let c = run_sweep(&ctx, &cfg).unwrap();
    assert_ne!(csv_without_time(&c.records), text);
}

#[test]
fn energy_window_is_labelled() {
    let ctx = SweepContext::load("h2").unwrap();
    let mut cfg = ExperimentConfig::new("h2", vec![Method::ShadowOnly, Method::V2rdmPlain], vec![1000], vec![1]);
    cfg.energy_window = Some(1e-3);
    let out = run_sweep(&ctx, &cfg).unwrap();
    let names: Vec<&str> = out.records.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(names, ["shadow_only", "v2rdm_plain+window"]);
}

#[test]
fn true_sampling_error_follows_inverse_square_root() {
    let ctx = SweepContext::load("h2").unwrap();
    let mut cfg = ExperimentConfig::new("h2", vec![Method::ShadowOnly], vec![100, 1_000, 10_000, 100_000], (0..16).collect());
    cfg.noise = NoiseMode::TrueSampling;
    cfg.batch_size = 1000;
    let out = run_sweep(&ctx, &cfg).unwrap();
    let slope = loglog_slope(&median_curve(&out.records, "shadow_only"));
    assert!((-0.55..=-0.45).contains(&slope), "slope {slope}");
}

#[test]
fn bias_sorting_and_zero_noise() {
    let ctx = SweepContext::load("h2").unwrap();
    let truth = ctx.truth.clone();
    let coef = vec![(0, 0, 0, 0.1), (2, 0, 3, -0.7), (2, 1, 1, 0.3), (2, 1, 2, 0.0)];
    let rows = bias_table(&coef, &[vec![(truth.clone(), truth.clone())]]).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0].coefficient.abs() >= w[1].coefficient.abs()));
    assert!(rows.iter().all(|r| r.displacement == vec![0.0]));
    assert!(matches!(bias_table(&coef, &[vec![]]), Err(HarnessError::MissingRuns(_))));

    let opts = SolverOptions::default();
    assert!(matches!(bias_report(&ctx, &[1000], 4, 1.0, &opts, 0), Err(HarnessError::MissingRuns(_))));
}

/// Measured on H4 at ε₁ = 1e-5: top-decile mean 9.4e-6, bottom-decile 1.0e-5.
/// The energy pushes nearly every element to the edge of the ball, so the
/// expected ordering does not appear.
#[test]
#[ignore = "direction not reproduced on H4; run with --ignored to see the numbers"]
fn heavy_coefficients_move_more() {
    // budget with z·σ = 1e-5
    let ctx = SweepContext::load("h4").unwrap();
    let z = coverage_z(4);
    let shots = (variance_bound(4, 8).unwrap() * (z / 1e-5).powi(2)).ceil() as u64;
    let opts = SolverOptions { tol: 1e-8, ..Default::default() };
    let rows = bias_report(&ctx, &[shots], 5, z, &opts, 3).unwrap();
    assert!(rows.windows(2).all(|w| w[0].coefficient.abs() >= w[1].coefficient.abs()));
    let decile = (rows.len() / 10).max(1);
    let mean = |s: &[rdmshadow::harness::BiasRow]| s.iter().map(|r| r.displacement[0]).sum::<f64>() / s.len() as f64;
    let top = mean(&rows[..decile]);
    let bottom = mean(&rows[rows.len() - decile..]);
    println!("top-decile displacement {top:.3e}, bottom-decile {bottom:.3e}");
    assert!(top > bottom);
}

#[test]
fn objective_kinds_agree_where_expected() {
    let ctx = SweepContext::load("h4").unwrap();
    let opts = SolverOptions { tol: 1e-8, ..Default::default() };
    let kinds = [ObjectiveKind::Energy, ObjectiveKind::EnergyMinusTrace, ObjectiveKind::TraceNorm];
    let (recs, fails) = cost_comparison(&ctx, &kinds, &[1e-6, 1e-2, 10.0], &[1, 2], coverage_z(4), &opts, 0).unwrap();
    assert!(fails.is_empty());
    let get = |k: &str, e: f64, s: u64| recs.iter().find(|r| r.objective == k && r.epsilon == e && r.seed == s).unwrap();
    for s in [1, 2] {
        for e in [1e-6, 1e-2, 10.0] {
            let a = get("energy", e, s);
            let b = get("energy_minus_trace", e, s);
            assert!((a.rdm_frob_err - b.rdm_frob_err).abs() < 1e-4, "{a:?} {b:?}");
            assert!((a.energy_est - b.energy_est).abs() < 1e-5);
        }
        // a tight ball pins the 2-RDM whatever the objective
        let t = get("trace_norm", 1e-6, s);
        assert!((t.rdm_frob_err - get("energy", 1e-6, s).rdm_frob_err).abs() < 1e-4);
    }
    // a loose ball reproduces the plain relaxation
    let mut cfg = ExperimentConfig::new("h4", vec![Method::V2rdmPlain], vec![1], vec![0]);
    cfg.solver = opts;
    let plain = run_sweep(&ctx, &cfg).unwrap();
    let loose = get("energy", 10.0, 1);
    assert!((loose.energy_est - plain.records[0].energy_est).abs() < 1e-5);
}
