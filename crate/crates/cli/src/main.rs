use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use erasure_core::costs::{assisted_report, exclusivity_dd, OptimizerConfig};
use erasure_core::formats::{
    load_bases, load_state, read_json, BasesSpec, ProtocolConfig, RecoveryScenario, StrategySpec,
};
use erasure_core::semidi::{certify_steering, simulate_protocol, write_runs_csv};
use erasure_core::werner;
use erasure_core::Execution;

/// Work costs and exclusivity of assisted quantum-memory erasure.
#[derive(Debug, Parser)]
#[command(name = "erasure", version)]
struct Cli {
    /// Seed for every sampled or optimized quantity; overrides config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, written atomically. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. 1 runs sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Optimizer settings as JSON.
    #[arg(long, global = true)]
    optimizer: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Party {
    A,
    E,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Erasure costs of Bob's half of a state file.
    Cost {
        state: PathBuf,
        #[arg(long, value_enum, default_value = "a")]
        party: Party,
        /// Per-run work budget W_max in bits.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Werner-family cost table as CSV.
    WernerSweep {
        #[arg(default_value_t = 0.0)]
        p_min: f64,
        #[arg(default_value_t = 1.0)]
        p_max: f64,
        #[arg(default_value_t = 101)]
        steps: usize,
    },
    /// Monte Carlo run of the verified erasure protocol.
    Simulate {
        config: PathBuf,
        /// Also write one CSV row per run.
        #[arg(long)]
        runs_csv: Option<PathBuf>,
    },
    /// Steering certificate from observed assisted costs.
    Certify {
        state: PathBuf,
        /// `{"r": basis, "s": basis}`; defaults to the qubit Z and X bases.
        #[arg(long)]
        bases: Option<PathBuf>,
        /// Helper strategy; defaults to the optimized matched strategy.
        #[arg(long)]
        strategy: Option<PathBuf>,
    },
    /// Verify-or-revert recovery scenario.
    Recover { scenario: PathBuf },
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes through a temporary file in the target directory and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(parent_dir(path))
        .with_context(|| format!("cannot write to {}", path.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write to {}", path.display()))?;
    Ok(())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

fn execution(threads: Option<usize>) -> Result<Execution> {
    match threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(1) => Ok(Execution::Sequential),
        Some(n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("cannot start the thread pool")?;
            #[cfg(not(feature = "parallel"))]
            let _ = n;
            Ok(Execution::default())
        }
        None => Ok(Execution::default()),
    }
}

fn optimizer(cli: &Cli, exec: Execution) -> Result<OptimizerConfig> {
    let mut cfg: OptimizerConfig = match &cli.optimizer {
        Some(p) => read_json(p)?,
        None => OptimizerConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.execution = exec;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let exec = execution(cli.threads)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Cost {
            state,
            party,
            budget,
        } => {
            let rho = load_state(state)?;
            let cfg = optimizer(cli, exec)?;
            let report = match party {
                Party::A => assisted_report(&rho, &cfg, *budget)?,
                Party::E => exclusivity_dd(&rho, &cfg, *budget)?,
            };
            emit(out, &to_json(&report)?)
        }
        Command::WernerSweep {
            p_min,
            p_max,
            steps,
        } => {
            let rows = werner::sweep(*p_min, *p_max, *steps, exec)?;
            let mut buf = Vec::new();
            werner::write_csv(&mut buf, &rows)?;
            emit(out, &buf)
        }
        Command::Simulate { config, runs_csv } => {
            let cfg: ProtocolConfig = read_json(config)?;
            let setup = cfg.setup(parent_dir(config), cli.seed, exec)?;
            let outcome = simulate_protocol(&setup)?;
            if let Some(path) = runs_csv {
                let mut buf = Vec::new();
                write_runs_csv(&mut buf, &outcome.records)?;
                write_atomic(path, &buf)?;
            }
            emit(out, &to_json(&outcome.summary)?)
        }
        Command::Certify {
            state,
            bases,
            strategy,
        } => {
            let rho = load_state(state)?;
            let bases_spec: Option<BasesSpec> = bases.as_deref().map(read_json).transpose()?;
            let base = bases.as_deref().map_or(Path::new("."), parent_dir);
            let pair = load_bases(bases_spec.as_ref(), base)?;
            let spec: StrategySpec = match strategy {
                Some(p) => read_json(p)?,
                None => StrategySpec::Optimized,
            };
            let sbase = strategy.as_deref().map_or(Path::new("."), parent_dir);
            let cfg = optimizer(cli, exec)?;
            let strat = spec.build(&rho, &pair, &cfg, sbase)?;
            emit(out, &to_json(&certify_steering(&rho, &pair, &strat)?)?)
        }
        Command::Recover { scenario } => {
            let s: RecoveryScenario = read_json(scenario)?;
            let report = s.run(parent_dir(scenario), exec)?;
            emit(out, &to_json(&report)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
