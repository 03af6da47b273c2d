mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{MEntry, SweepFile};
use nsmpi::adversarial::{build_tight_mdp, verify_tight_trajectory, TightInstanceSpec};
use nsmpi::benchmarks::{garnet_mdp, GarnetSpec};
use nsmpi::dp::run_trace_json;
use nsmpi::harness::{run_sweep, solve_trace, summarize, write_solve_csv, write_sweep_csv, SolveMethod, SweepConfig};
use nsmpi::{nsmpi_run, Error, FiniteMdp, MParameter, NsmpiConfig};

#[derive(Parser)]
#[command(name = "nsmpi", version, about = "Non-stationary modified policy iteration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Solve an MDP file exactly and write a per-iteration CSV trace.
    Solve(SolveArgs),
    /// Check the trajectory and loss on the adversarial chain.
    Tight(TightArgs),
    /// Seeded (ℓ, m) sweep with random errors.
    Sweep(SweepArgs),
    /// The dynamic location sweep with a run-averaged summary.
    BenchDynloc(DynlocArgs),
    /// Write a random Garnet MDP as JSON.
    GenGarnet(GarnetArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Vi,
    Pi,
    Nsmpi,
}

#[derive(Args)]
struct SolveArgs {
    /// MDP JSON file.
    mdp: PathBuf,
    #[arg(long, value_enum, default_value = "pi")]
    method: Method,
    /// Evaluation steps per iteration (`inf` for exact evaluation).
    #[arg(long, default_value = "1")]
    m: MParameter,
    /// Period of the output policy.
    #[arg(long, default_value_t = 1)]
    ell: usize,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    /// Largest final Bellman residual accepted for vi / nsmpi.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the full nsmpi run as JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct TightArgs {
    #[arg(long, default_value_t = 2)]
    ell: usize,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 8)]
    iterations: usize,
    /// Chain length; defaults to the smallest admissible one.
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the chain MDP as JSON.
    #[arg(long)]
    write_mdp: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML or JSON file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// dynloc, tight, garnet or file.
    #[arg(long)]
    source: Option<String>,
    /// MDP JSON for `--source file`.
    #[arg(long)]
    mdp: Option<PathBuf>,
    /// Sites of the dynamic location problem.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    actions: Option<usize>,
    #[arg(long)]
    branching: Option<usize>,
    #[arg(long)]
    sparsity: Option<f64>,
    #[arg(long)]
    garnet_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    ells: Option<Vec<usize>>,
    /// Comma separated; `inf` for exact evaluation.
    #[arg(long, value_delimiter = ',')]
    ms: Option<Vec<String>>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed ℓ·m budget; replaces the m grid.
    #[arg(long)]
    budget: Option<usize>,
    /// Fill the `seconds` column (output is then not reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DynlocArgs {
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 0.98)]
    gamma: f64,
    #[arg(long, default_value_t = 4.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 150)]
    iterations: usize,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
    ells: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,25,inf")]
    ms: Vec<MParameter>,
    /// Iterations averaged for the summary plateau.
    #[arg(long, default_value_t = 50)]
    window: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GarnetArgs {
    #[arg(long, default_value_t = 20)]
    states: usize,
    #[arg(long, default_value_t = 4)]
    actions: usize,
    #[arg(long, default_value_t = 3)]
    branching: usize,
    #[arg(long, default_value_t = 0.0)]
    sparsity: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An error and the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: 2, error: error.into() }
    }

    fn run(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: 1, error: error.into() }
    }
}

type Outcome = Result<(), Failure>;

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_mdp(path: &Path) -> Result<FiniteMdp, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::input)?;
    FiniteMdp::from_json(&text)
        .with_context(|| format!("{} is not a valid MDP", path.display()))
        .map_err(Failure::input)
}

fn solve(args: SolveArgs) -> Outcome {
    let mdp = load_mdp(&args.mdp)?;
    let method = match args.method {
        Method::Vi => SolveMethod::Vi,
        Method::Pi => SolveMethod::Pi,
        Method::Nsmpi => SolveMethod::Nsmpi { m: args.m, ell: args.ell },
    };
    let rows = solve_trace(&mdp, method, args.iterations).map_err(|e| match e {
        Error::InvalidInput(_) => Failure::input(e),
        _ => Failure::run(e),
    })?;
    let mut out = output(args.out.as_deref()).map_err(Failure::run)?;
    write_solve_csv(&mut out, &rows).map_err(Failure::run)?;
    out.flush().map_err(Failure::run)?;

    if let (Method::Nsmpi, Some(path)) = (args.method, &args.trace) {
        let config = NsmpiConfig::new(args.m, args.ell, args.iterations);
        let v_star = nsmpi::dp::solve_optimal(&mdp).map_err(Failure::run)?.1;
        let records = nsmpi_run(&mdp, &config, Some(&v_star)).map_err(Failure::run)?;
        let json = run_trace_json(&config, &records).map_err(Failure::run)?;
        std::fs::write(path, json)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::run)?;
    }

    let last = rows.last().expect("at least one row");
    eprintln!(
        "{} iterations, final ‖v − v*‖∞ = {:e}, residual = {:e}, loss = {:e}",
        rows.len(),
        last.value_error,
        last.bellman_residual,
        last.loss
    );
    if !matches!(args.method, Method::Pi) && last.bellman_residual > args.tolerance {
        return Err(Failure::run(anyhow!(
            "not converged: residual {:e} exceeds {:e} after {} iterations",
            last.bellman_residual,
            args.tolerance,
            args.iterations
        )));
    }
    Ok(())
}

fn tight(args: TightArgs) -> Outcome {
    let mut spec = TightInstanceSpec::new(args.ell, args.m, args.epsilon, args.gamma, args.iterations)
        .map_err(Failure::input)?;
    if let Some(n) = args.states {
        spec = spec.with_num_states(n).map_err(Failure::input)?;
    }
    if let Some(path) = &args.write_mdp {
        let json = build_tight_mdp(&spec).and_then(|m| m.to_json()).map_err(Failure::run)?;
        std::fs::write(path, json)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::run)?;
    }
    let report = verify_tight_trajectory(&spec).map_err(Failure::run)?;
    let mut out = output(args.out.as_deref()).map_err(Failure::run)?;
    report.write_csv(&mut out).map_err(Failure::run)?;
    out.flush().map_err(Failure::run)?;
    eprintln!(
        "ℓ = {}, m = {}, {} states: trajectory {}, bound {}",
        spec.ell,
        spec.m,
        spec.num_states,
        if report.success { "matches" } else { "MISMATCH" },
        if report.bound_attained { "attained" } else { "NOT attained" }
    );
    if !report.success && spec.epsilon == 0.0 {
        eprintln!("with ε = 0 every action ties, so greedy policies follow the tie-break");
    }
    if report.bound_attained {
        Ok(())
    } else {
        Err(Failure::run(anyhow!("the loss does not meet the bound with equality")))
    }
}

fn write_sweep(config: &SweepConfig, out: Option<&Path>) -> Result<Vec<nsmpi::harness::SweepRow>, Failure> {
    let rows = run_sweep(config).map_err(Failure::run)?;
    let mut sink = output(out).map_err(Failure::run)?;
    write_sweep_csv(&mut sink, &rows).map_err(Failure::run)?;
    sink.flush().map_err(Failure::run)?;
    Ok(rows)
}

fn sweep(args: SweepArgs) -> Outcome {
    let base = match &args.config {
        Some(path) => SweepFile::load(path).map_err(Failure::input)?,
        None => SweepFile::default(),
    };
    let flags = SweepFile {
        source: args.source,
        n: args.n,
        mdp: args.mdp,
        states: args.states,
        actions: args.actions,
        branching: args.branching,
        sparsity: args.sparsity,
        garnet_seed: args.garnet_seed,
        ells: args.ells,
        ms: args.ms.map(|ms| ms.into_iter().map(MEntry::Token).collect()),
        epsilon: args.epsilon,
        gamma: args.gamma,
        iterations: args.iterations,
        runs: args.runs,
        seed: args.seed,
        budget: args.budget,
        timing: args.timing.then_some(true),
        out: args.out,
    };
    let merged = base.overlay(flags);
    let config = merged.resolve().map_err(Failure::input)?;
    let rows = write_sweep(&config, merged.out.as_deref())?;
    eprintln!("{} rows over {} cells", rows.len(), config.cells().len());
    Ok(())
}

fn bench_dynloc(args: DynlocArgs) -> Outcome {
    let config = SweepConfig {
        source: nsmpi::harness::MdpSource::Dynloc { n: args.n },
        ells: args.ells,
        ms: args.ms,
        epsilon: args.epsilon,
        gamma: args.gamma,
        iterations: args.iterations,
        runs: args.runs,
        base_seed: args.seed,
        fixed_budget: None,
        timing: false,
    };
    config.validate().map_err(Failure::input)?;
    let rows = write_sweep(&config, args.out.as_deref())?;
    eprintln!("{:>4} {:>5} {:>12} {:>12}", "ell", "m", "plateau", "final_sup");
    for cell in summarize(&rows) {
        eprintln!(
            "{:>4} {:>5} {:>12.4} {:>12.4}",
            cell.ell,
            cell.m,
            cell.plateau(args.window),
            cell.sup_loss.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn gen_garnet(args: GarnetArgs) -> Outcome {
    let mdp = garnet_mdp(&GarnetSpec {
        num_states: args.states,
        num_actions: args.actions,
        branching: args.branching,
        reward_sparsity: args.sparsity,
        discount: args.gamma,
        seed: args.seed,
    })
    .map_err(Failure::input)?;
    let mut out = output(args.out.as_deref()).map_err(Failure::run)?;
    let json = mdp.to_json().map_err(Failure::run)?;
    writeln!(out, "{json}").and_then(|_| out.flush()).map_err(Failure::run)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Tight(a) => tight(a),
        Command::Sweep(a) => sweep(a),
        Command::BenchDynloc(a) => bench_dynloc(a),
        Command::GenGarnet(a) => gen_garnet(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
