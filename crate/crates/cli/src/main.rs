use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rdmshadow::fci::{read_cached_state, write_cached_state};
use rdmshadow::fixtures;
use rdmshadow::harness::{
    bias_report, cost_comparison, improvement_factor, median_curve, read_csv, run_sweep, write_bias_csv,
    write_cost_csv, write_csv, ExperimentConfig, Method, NoiseMode, SweepContext,
};
use rdmshadow::sdp::SolverOptions;
use rdmshadow::shadow::{sample_shots, variance_bound};
use rdmshadow::v2rdm::ObjectiveKind;

#[derive(Parser)]
#[command(name = "rdmshadow", version, about = "2-RDM estimation from fermionic classical shadows")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed for every RNG stream
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (CSV for tables)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// SDP solver tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state energy of an FCIDUMP file or built-in fixture
    Fci {
        fcidump: String,
        /// Cache file for the ground state
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Matchgate shadow sampling statistics against FCI
    Sample {
        #[arg(long, default_value = "h4")]
        fixture: String,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long, default_value_t = 4096)]
        batch: u64,
    },
    /// One sweep cell
    Optimize {
        #[arg(long, default_value = "h4")]
        fixture: String,
        #[arg(long, default_value = "v2rdm_c1")]
        method: String,
        #[arg(long, default_value_t = 1_000_000)]
        shots: u64,
        /// Seed label of the cell
        #[arg(long = "cell-seed", default_value_t = 0)]
        cell_seed: u64,
        #[arg(long, default_value = "energy")]
        objective: String,
        #[arg(long, default_value_t = 1.0)]
        z: f64,
        /// Energy window half-width in Hartree
        #[arg(long)]
        window: Option<f64>,
        /// Number of bases for v2rdm_c2
        #[arg(long)]
        bases: Option<usize>,
        /// Noise-free diagonals for v2rdm_c2
        #[arg(long)]
        exact_diagonals: bool,
        /// Simulate matchgate measurements instead of Gaussian noise
        #[arg(long)]
        true_sampling: bool,
    },
    /// Run a sweep described by a JSON config
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Displacement of v2rdm_c1 optima from the shadow input, by Hamiltonian coefficient
    BiasReport {
        #[arg(long, default_value = "h4")]
        fixture: String,
        #[arg(long, value_delimiter = ',', default_value = "1000000,100000000")]
        budgets: Vec<u64>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 1.0)]
        z: f64,
    },
    /// Frobenius error of each objective kind over ball radii
    CostCompare {
        #[arg(long, default_value = "h4")]
        fixture: String,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.001,0.0001")]
        epsilons: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "energy,energy_minus_trace,trace_norm")]
        kinds: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        z: f64,
    },
    /// Shots ratio between two sweep CSVs at matched median error
    Improvement {
        csv_a: PathBuf,
        csv_b: PathBuf,
        #[arg(long, default_value = "shadow_only")]
        method_a: String,
        #[arg(long, default_value = "v2rdm_c1")]
        method_b: String,
    },
}

fn solver_options(g: &Global, base: SolverOptions) -> SolverOptions {
    SolverOptions { tol: g.tol.unwrap_or(base.tol), ..base }
}

fn print(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn out_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Returns the number of failed cells.
fn run(cli: Cli) -> Result<usize> {
    let g = &cli.global;
    match cli.command {
        Command::Fci { fcidump, cache } => {
            let (text, ints) = fixtures::resolve(&fcidump).with_context(|| format!("loading {fcidump}"))?;
            let cached = match &cache {
                Some(p) if p.exists() => read_cached_state(p, &text)?,
                _ => None,
            };
            let from_cache = cached.is_some();
            let state = match cached {
                Some(s) => s,
                None => rdmshadow::fci::ground_state(&ints)?,
            };
            if let (Some(p), false) = (&cache, from_cache) {
                write_cached_state(p, &text, &state)?;
            }
            print(&json!({
                "fixture": fcidump,
                "n_orb": ints.n_orb,
                "n_alpha": ints.n_alpha,
                "n_beta": ints.n_beta,
                "determinants": state.space.dim(),
                "energy": state.energy,
                "reference_energy": fixtures::reference_energy(&fcidump),
                "from_cache": from_cache,
            }))?;
            Ok(0)
        }
        Command::Sample { fixture, shots, batch } => {
            let ctx = SweepContext::load(&fixture)?;
            let acc = sample_shots(&ctx.state, shots, g.seed, batch)?;
            let mean = acc.mean();
            let se = acc.standard_errors();
            let mut worst: f64 = 0.0;
            for (k, (m, t)) in mean.blocks().iter().zip(ctx.truth.blocks()).enumerate().skip(2) {
                let s = se.blocks()[k];
                for i in 0..m.len() {
                    if s[i] > 0.0 {
                        worst = worst.max((m[i] - t[i]).abs() / s[i]);
                    }
                }
            }
            let eta = ctx.ints.n_alpha + ctx.ints.n_beta;
            print(&json!({
                "fixture": fixture,
                "shots": shots,
                "seed": g.seed,
                "average_single_shot_variance": acc.average_variance(),
                "variance_bound": variance_bound(eta, 2 * ctx.ints.n_orb)?,
                "max_standard_errors_from_fci": worst,
                "rdm_frob_err": mean.d2_frobenius_distance(&ctx.truth),
            }))?;
            Ok(0)
        }
        Command::Optimize { fixture, method, shots, cell_seed, objective, z, window, bases, exact_diagonals, true_sampling } => {
            let method: Method = method.parse()?;
            let mut cfg = ExperimentConfig::new(&fixture, vec![method], vec![shots], vec![cell_seed]);
            cfg.objective = objective.parse()?;
            cfg.z = z;
            cfg.energy_window = window;
            cfg.c2_bases = bases;
            cfg.exact_diagonals = exact_diagonals;
            cfg.noise = if true_sampling { NoiseMode::TrueSampling } else { NoiseMode::Surrogate };
            cfg.master_seed = g.seed;
            cfg.workers = g.workers;
            cfg.solver = solver_options(g, cfg.solver);
            sweep(cfg, g.out.as_deref())
        }
        Command::Sweep { config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if g.workers != 0 {
                cfg.workers = g.workers;
            }
            if g.seed != 0 {
                cfg.master_seed = g.seed;
            }
            cfg.solver = solver_options(g, cfg.solver);
            sweep(cfg, g.out.as_deref())
        }
        Command::BiasReport { fixture, budgets, runs, z } => {
            let ctx = SweepContext::load(&fixture)?;
            let opts = solver_options(g, SolverOptions::default());
            let rows = bias_report(&ctx, &budgets, runs, z, &opts, g.seed)?;
            let labels: Vec<String> = budgets.iter().map(|b| b.to_string()).collect();
            match &g.out {
                Some(p) => write_bias_csv(out_file(p)?, &rows, &labels)?,
                None => write_bias_csv(std::io::stdout().lock(), &rows, &labels)?,
            }
            Ok(0)
        }
        Command::CostCompare { fixture, epsilons, seeds, kinds, z } => {
            let ctx = SweepContext::load(&fixture)?;
            let kinds: Vec<ObjectiveKind> = kinds.iter().map(|k| k.parse()).collect::<Result<_, _>>()?;
            let opts = solver_options(g, SolverOptions::default());
            let (recs, fails) = cost_comparison(&ctx, &kinds, &epsilons, &seeds, z, &opts, g.seed)?;
            match &g.out {
                Some(p) => write_cost_csv(out_file(p)?, &recs)?,
                None => write_cost_csv(std::io::stdout().lock(), &recs)?,
            }
            for f in &fails {
                eprintln!("failed: {} eps-shots {} seed {}: {}", f.method, f.shots, f.seed, f.error);
            }
            Ok(fails.len())
        }
        Command::Improvement { csv_a, csv_b, method_a, method_b } => {
            let a = read_csv(File::open(&csv_a).with_context(|| format!("opening {}", csv_a.display()))?)?;
            let b = read_csv(File::open(&csv_b).with_context(|| format!("opening {}", csv_b.display()))?)?;
            let ca = median_curve(&a, &method_a);
            let cb = median_curve(&b, &method_b);
            if ca.is_empty() || cb.is_empty() {
                bail!("no records for `{method_a}` in A or `{method_b}` in B");
            }
            let table = improvement_factor(&ca, &cb)?;
            let max = table.iter().filter(|e| !e.censored).map(|e| e.factor).fold(f64::NAN, f64::max);
            print(&json!({ "reference": method_a, "new": method_b, "max_uncensored_factor": max, "table": table }))?;
            Ok(0)
        }
    }
}

fn sweep(cfg: ExperimentConfig, out: Option<&Path>) -> Result<usize> {
    let ctx = SweepContext::load(&cfg.fixture)?;
    let res = run_sweep(&ctx, &cfg)?;
    match out {
        Some(p) => write_csv(out_file(p)?, &res.records)?,
        None => write_csv(std::io::stdout().lock(), &res.records)?,
    }
    let summary = json!({
        "config": cfg,
        "energy_fci": ctx.energy_fci,
        "m_bases": res.m_bases,
        "records": res.records.len(),
        "failures": res.failures,
        "csv": out.map(|p| p.display().to_string()),
    });
    if let Some(p) = out {
        let js = p.with_extension("json");
        std::fs::write(&js, serde_json::to_string_pretty(&summary)?)?;
        print(&summary)?;
    } else {
        eprintln!("{}", serde_json::to_string_pretty(&summary)?);
    }
    Ok(res.failures.len())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} cell(s) failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
