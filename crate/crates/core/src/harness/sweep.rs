use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bias_table, cell_seed, BiasRow, ExperimentConfig, HarnessError, Method, NoiseMode, SweepRecord};
use crate::fci::{compute_rdms, ground_state, FciVector};
use crate::fixtures;
use crate::integrals::{energy_from_rdms, MolecularIntegrals};
use crate::rdm::SpinBlockedRdms;
use crate::sdp::{solve_bpsdp_from, SdpProblem, SdpSolution, SolverOptions, SolverStatus};
use crate::shadow::{
    diagonal_measurements, gaussian_surrogate, match_basis_count, sample_haar_rotation, sample_shots, variance_bound,
    VarianceBudget,
};
use crate::v2rdm::{
    add_diagonal_constraints, add_energy_window, add_shadow_ball, build_nrep_problem, build_objective, energy_builder,
    extract_rdms, ObjectiveKind, V2rdmLayout,
};

/// A fixture with its FCI ground state.
#[derive(Debug, Clone)]
pub struct SweepContext {
    pub fixture: String,
    pub ints: MolecularIntegrals,
    pub state: FciVector,
    pub truth: SpinBlockedRdms,
    pub energy_fci: f64,
}

impl SweepContext {
    /// Resolves a built-in fixture id or an FCIDUMP path and solves FCI.
    pub fn load(fixture: &str) -> Result<Self, HarnessError> {
        let (_, ints) = fixtures::resolve(fixture)?;
        Self::from_integrals(fixture, ints)
    }

    pub fn from_integrals(fixture: &str, ints: MolecularIntegrals) -> Result<Self, HarnessError> {
        let state = ground_state(&ints)?;
        let truth = compute_rdms(&state)?;
        let energy_fci = state.energy.unwrap_or(f64::NAN);
        Ok(Self { fixture: fixture.to_string(), ints, state, truth, energy_fci })
    }

    fn n_spin_orbitals(&self) -> usize {
        2 * self.ints.n_orb
    }

    fn eta(&self) -> usize {
        self.ints.n_alpha + self.ints.n_beta
    }

    /// Shadow estimate and `ε₁` for one budget.
    fn shadow_input(&self, cfg: &ExperimentConfig, budget: u64, seed_index: usize, seed: u64) -> Result<(SpinBlockedRdms, f64), HarnessError> {
        let s = cell_seed(cfg.master_seed, &self.fixture, "shadow", budget, seed_index, seed);
        match cfg.noise {
            NoiseMode::Surrogate => {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                Ok(gaussian_surrogate(&self.truth, budget, &mut rng, cfg.z)?)
            }
            NoiseMode::TrueSampling => {
                let acc = sample_shots(&self.state, budget, s, cfg.batch_size)?;
                let vb = VarianceBudget::new(self.eta(), self.n_spin_orbitals(), budget, cfg.z, 0)?;
                Ok((acc.mean(), vb.epsilon1))
            }
        }
    }

    /// The N-representability problem with the objective and optional energy window.
    fn base_problem(&self, objective: ObjectiveKind, window: Option<f64>) -> Result<(SdpProblem, V2rdmLayout), HarnessError> {
        let (mut p, mut l) = build_nrep_problem(&self.ints);
        p.c = build_objective(&l, &self.ints, objective);
        if let Some(w) = window {
            add_energy_window(&mut p, &mut l, &self.ints, self.energy_fci, w)?;
        }
        Ok((p, l))
    }
}

/// A cell that produced no record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub method: String,
    pub shots: u64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    /// RDMs behind each record, in the same order.
    pub rdms: Vec<SpinBlockedRdms>,
    pub failures: Vec<CellFailure>,
    /// Bases used by `v2rdm_c2`, if it ran.
    pub m_bases: Option<usize>,
}

struct Solved {
    rdms: SpinBlockedRdms,
    solution: SdpSolution,
}

fn solve(problem: &SdpProblem, layout: &V2rdmLayout, opts: &SolverOptions, start: Option<&SdpSolution>) -> Result<Solved, HarnessError> {
    let solution = solve_bpsdp_from(problem, opts, start)?;
    if solution.status == SolverStatus::MaxIter {
        log::warn!("solver stopped at the iteration cap with primal residual {:.2e}", solution.primal_residual);
    }
    let rdms = extract_rdms(layout, &solution)?;
    Ok(Solved { rdms, solution })
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

struct Cell {
    method: Method,
    budget: u64,
    seed_index: usize,
    seed: u64,
}

/// Runs every `(method, budget, seed)` cell of a config.
///
/// `v2rdm_plain` is solved once and reused for every budget; its solution
/// also warm-starts the constrained solves. `shadow_only` and `v2rdm_c1`
/// share the shadow estimate of a `(budget, seed)` pair. Failed cells are
/// collected in [`SweepOutput::failures`].
pub fn run_sweep(ctx: &SweepContext, cfg: &ExperimentConfig) -> Result<SweepOutput, HarnessError> {
    cfg.validate()?;
    in_pool(cfg.workers, || run_cells(ctx, cfg))
}

fn run_cells(ctx: &SweepContext, cfg: &ExperimentConfig) -> Result<SweepOutput, HarnessError> {
    let needs_base = cfg.methods.iter().any(|m| m.is_v2rdm());
    let base = if needs_base { Some(ctx.base_problem(cfg.objective, cfg.energy_window)?) } else { None };
    let t0 = Instant::now();
    let plain = match &base {
        Some((p, l)) => Some(solve(p, l, &cfg.solver, None)?),
        None => None,
    };
    let plain_time = t0.elapsed().as_secs_f64();
    let m_bases = if cfg.methods.contains(&Method::V2rdmC2) {
        Some(match cfg.c2_bases {
            Some(m) => m,
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(cfg.master_seed, &ctx.fixture, "m_bases", 0, 0, 0));
                let i = &ctx.ints;
                match_basis_count(ctx.eta(), i.n_alpha, i.n_beta, ctx.n_spin_orbitals(), Some(&ctx.state), &mut rng)?
            }
        })
    } else {
        None
    };

    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &budget in &cfg.budgets {
            for (seed_index, &seed) in cfg.seeds.iter().enumerate() {
                cells.push(Cell { method, budget, seed_index, seed });
            }
        }
    }
    let suffix = if cfg.energy_window.is_some() { "+window" } else { "" };
    let results: Vec<Result<(SweepRecord, SpinBlockedRdms), CellFailure>> = cells
        .par_iter()
        .map(|c| {
            let t = Instant::now();
            let out = run_cell(ctx, cfg, c, base.as_ref(), plain.as_ref(), m_bases);
            let method = if c.method.is_v2rdm() { format!("{}{suffix}", c.method) } else { c.method.to_string() };
            match out {
                Ok((rdms, iters, gap, m)) => {
                    let wall = if c.method == Method::V2rdmPlain { plain_time } else { t.elapsed().as_secs_f64() };
                    let energy_est = energy_from_rdms(&ctx.ints, &rdms).map_err(|e| CellFailure {
                        method: method.clone(),
                        shots: c.budget,
                        seed: c.seed,
                        error: e.to_string(),
                    })?;
                    let rec = SweepRecord {
                        fixture: ctx.fixture.clone(),
                        method,
                        objective: cfg.objective.to_string(),
                        shots: c.budget,
                        m_bases: m,
                        seed: c.seed,
                        energy_est,
                        energy_fci: ctx.energy_fci,
                        energy_err: (energy_est - ctx.energy_fci).abs(),
                        rdm_frob_err: rdms.d2_frobenius_distance(&ctx.truth),
                        solver_iters: iters,
                        solver_gap: gap,
                        wall_time_s: wall,
                    };
                    Ok((rec, rdms))
                }
                Err(e) => {
                    log::warn!("{method} at {} shots, seed {}: {e}", c.budget, c.seed);
                    Err(CellFailure { method, shots: c.budget, seed: c.seed, error: e.to_string() })
                }
            }
        })
        .collect();
    let mut out = SweepOutput { records: Vec::new(), rdms: Vec::new(), failures: Vec::new(), m_bases };
    for r in results {
        match r {
            Ok((rec, rdms)) => {
                out.records.push(rec);
                out.rdms.push(rdms);
            }
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}

type CellResult = (SpinBlockedRdms, usize, f64, usize);

fn run_cell(
    ctx: &SweepContext,
    cfg: &ExperimentConfig,
    c: &Cell,
    base: Option<&(SdpProblem, V2rdmLayout)>,
    plain: Option<&Solved>,
    m_bases: Option<usize>,
) -> Result<CellResult, HarnessError> {
    let missing = || HarnessError::Config("v2rdm base problem was not built".into());
    match c.method {
        Method::ShadowOnly => {
            let (noisy, _) = ctx.shadow_input(cfg, c.budget, c.seed_index, c.seed)?;
            Ok((noisy, 0, 0.0, 0))
        }
        Method::V2rdmPlain => {
            let s = plain.ok_or_else(missing)?;
            Ok((s.rdms.clone(), s.solution.iterations, s.solution.gap, 0))
        }
        Method::V2rdmC1 => {
            let (p, l) = base.ok_or_else(missing)?;
            let (noisy, eps) = ctx.shadow_input(cfg, c.budget, c.seed_index, c.seed)?;
            let (mut p, mut l) = (p.clone(), l.clone());
            add_shadow_ball(&mut p, &mut l, &noisy, eps)?;
            let s = solve(&p, &l, &cfg.solver, plain.map(|s| &s.solution))?;
            Ok((s.rdms, s.solution.iterations, s.solution.gap, 0))
        }
        Method::V2rdmC2 => {
            let (p, l) = base.ok_or_else(missing)?;
            let m = m_bases.ok_or_else(missing)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(cfg.master_seed, &ctx.fixture, "v2rdm_c2", c.budget, c.seed_index, c.seed));
            let rotations: Vec<_> = (0..m).map(|_| sample_haar_rotation(ctx.ints.n_orb, &mut rng, true)).collect();
            let per_basis = if cfg.exact_diagonals { None } else { Some((c.budget / m as u64).max(1)) };
            let set = diagonal_measurements(&ctx.state, &rotations, per_basis, &mut rng, cfg.z)?;
            let (mut p, mut l) = (p.clone(), l.clone());
            add_diagonal_constraints(&mut p, &mut l, &set.samples, set.epsilon2)?;
            let s = solve(&p, &l, &cfg.solver, plain.map(|s| &s.solution))?;
            Ok((s.rdms, s.solution.iterations, s.solution.gap, m))
        }
    }
}

/// Writes records as CSV with a header row.
pub fn write_csv<W: Write>(w: W, records: &[SweepRecord]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<SweepRecord>, HarnessError> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize().map(|r| r.map_err(HarnessError::from)).collect()
}

/// Upper-triangle Hamiltonian coefficients on the three 2-RDM blocks, as
/// `(block 0/1/2, i, j, coefficient on the variable)`.
fn two_body_coefficients(ctx: &SweepContext, layout: &V2rdmLayout) -> Vec<(usize, usize, usize, f64)> {
    let row = energy_builder(layout, &ctx.ints).build();
    let blocks = [layout.d2_same[0], layout.d2_same[1], layout.d2_ab];
    let mut acc: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    for e in &row.entries {
        if let Some(b) = blocks.iter().position(|&x| x == e.block) {
            let w = if e.i == e.j { 1.0 } else { 2.0 };
            *acc.entry((b, e.i.min(e.j), e.i.max(e.j))).or_insert(0.0) += w * e.value;
        }
    }
    acc.into_iter().map(|((b, i, j), c)| (b, i, j, c)).collect()
}

/// Displacement of `v2rdm_c1` optima from their (surrogate) shadow input at
/// each budget, averaged over `runs` noise draws.
pub fn bias_report(
    ctx: &SweepContext,
    budgets: &[u64],
    runs: usize,
    z: f64,
    opts: &SolverOptions,
    master_seed: u64,
) -> Result<Vec<BiasRow>, HarnessError> {
    if runs < 5 {
        return Err(HarnessError::MissingRuns(format!("{runs} runs per budget, at least 5 are needed")));
    }
    if budgets.is_empty() {
        return Err(HarnessError::MissingRuns("no budgets".into()));
    }
    let (p, l) = ctx.base_problem(ObjectiveKind::Energy, None)?;
    let plain = solve(&p, &l, opts, None)?;
    let mut cfg = ExperimentConfig::new(&ctx.fixture, vec![Method::V2rdmC1], budgets.to_vec(), (0..runs as u64).collect());
    cfg.z = z;
    cfg.master_seed = master_seed;
    let mut levels = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        let level: Result<Vec<_>, HarnessError> = (0..runs)
            .into_par_iter()
            .map(|r| {
                let (noisy, eps) = ctx.shadow_input(&cfg, budget, r, r as u64)?;
                let (mut q, mut lq) = (p.clone(), l.clone());
                add_shadow_ball(&mut q, &mut lq, &noisy, eps)?;
                let s = solve(&q, &lq, opts, Some(&plain.solution))?;
                Ok((noisy, s.rdms))
            })
            .collect();
        levels.push(level?);
    }
    bias_table(&two_body_coefficients(ctx, &l), &levels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub objective: String,
    pub epsilon: f64,
    pub seed: u64,
    pub shots: u64,
    pub energy_est: f64,
    pub energy_err: f64,
    pub rdm_frob_err: f64,
    pub solver_iters: usize,
}

/// `v2rdm_c1` with each objective kind over a range of ball radii.
///
/// The shadow input for radius `ε` is a surrogate at the budget whose
/// `z·σ` equals `ε`; all kinds see the same input for a given `(ε, seed)`.
pub fn cost_comparison(
    ctx: &SweepContext,
    kinds: &[ObjectiveKind],
    epsilons: &[f64],
    seeds: &[u64],
    z: f64,
    opts: &SolverOptions,
    master_seed: u64,
) -> Result<(Vec<CostRecord>, Vec<CellFailure>), HarnessError> {
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0)) {
        return Err(HarnessError::Config(format!("epsilon must be positive, got {e}")));
    }
    let bound = variance_bound(ctx.eta(), ctx.n_spin_orbitals())?;
    let mut cfg = ExperimentConfig::new(&ctx.fixture, vec![Method::V2rdmC1], vec![1], seeds.to_vec());
    cfg.z = z;
    cfg.master_seed = master_seed;
    let (p0, l0) = ctx.base_problem(ObjectiveKind::Energy, None)?;
    let plain = solve(&p0, &l0, opts, None)?;
    let mut cells = Vec::new();
    for &kind in kinds {
        for &eps in epsilons {
            for (k, &seed) in seeds.iter().enumerate() {
                cells.push((kind, eps, k, seed));
            }
        }
    }
    let results: Vec<Result<CostRecord, CellFailure>> = cells
        .par_iter()
        .map(|&(kind, eps, k, seed)| {
            let shots = (bound * (z / eps).powi(2)).ceil().max(1.0) as u64;
            let fail = |e: HarnessError| CellFailure { method: kind.to_string(), shots, seed, error: e.to_string() };
            let run = || -> Result<CostRecord, HarnessError> {
                let (noisy, _) = ctx.shadow_input(&cfg, shots, k, seed)?;
                let (mut p, mut l) = ctx.base_problem(kind, None)?;
                add_shadow_ball(&mut p, &mut l, &noisy, eps)?;
                let s = solve(&p, &l, opts, Some(&plain.solution))?;
                let energy_est = energy_from_rdms(&ctx.ints, &s.rdms)?;
                Ok(CostRecord {
                    objective: kind.to_string(),
                    epsilon: eps,
                    seed,
                    shots,
                    energy_est,
                    energy_err: (energy_est - ctx.energy_fci).abs(),
                    rdm_frob_err: s.rdms.d2_frobenius_distance(&ctx.truth),
                    solver_iters: s.solution.iterations,
                })
            };
            run().map_err(fail)
        })
        .collect();
    let mut recs = Vec::new();
    let mut fails = Vec::new();
    for r in results {
        match r {
            Ok(x) => recs.push(x),
            Err(f) => fails.push(f),
        }
    }
    Ok((recs, fails))
}

pub fn write_cost_csv<W: Write>(w: W, records: &[CostRecord]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
