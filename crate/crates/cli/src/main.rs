use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "semiclassical", version, about = "Wave packets, envelopes and classical transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory. Defaults to `<root>/<scenario name>`, where the
    /// root comes from SEMICLASSICAL_OUT or `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run even when the initial packet fails the scale check.
    #[arg(long, global = true)]
    force: bool,
    /// Also write raw little-endian dumps with JSON sidecars.
    #[arg(long, global = true)]
    dump_binary: bool,
    /// Scenario override such as `grid.n=2048` (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Evolve the wave function and record observables.
    Schrodinger,
    /// Extract the envelope of the initial wave function.
    Envelope,
    /// Transport a phase-space density along the Hamiltonian flow.
    Liouville,
    /// Print the many-body identity residuals as CSV.
    ManybodyCheck,
    /// Rate matrix, master equation or Boltzmann run.
    Kinetics,
    /// Envelope density against Liouville transport.
    Compare,
    /// Barrier splitting with per-lobe tracking.
    Barrier,
}

fn output_root() -> PathBuf {
    std::env::var_os("SEMICLASSICAL_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    if let Some(n) = c.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().context("configuring the worker pool")?;
    }
    let path = c.scenario.as_deref().context("--scenario is required")?;
    if !path.is_file() {
        anyhow::bail!("scenario file {} does not exist", path.display());
    }
    let mut scenario = semiclassical::correspondence::Scenario::load(path, &c.overrides)
        .with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = c.seed {
        scenario.seed = seed;
    }
    let out = c.out.clone().unwrap_or_else(|| output_root().join(&scenario.name));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let ctx = commands::Context { scenario: &scenario, out: &out, force: c.force, dump_binary: c.dump_binary };
    match cli.command {
        Command::Schrodinger => commands::schrodinger(&ctx),
        Command::Envelope => commands::envelope(&ctx),
        Command::Liouville => commands::liouville(&ctx),
        Command::ManybodyCheck => commands::manybody_check(&ctx),
        Command::Kinetics => commands::kinetics(&ctx),
        Command::Compare => commands::compare(&ctx),
        Command::Barrier => commands::barrier(&ctx),
    }
}

/// 2 for numerical failures of a solver, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical =
        err.chain().filter_map(|e| e.downcast_ref::<semiclassical::Error>()).any(semiclassical::Error::is_numerical);
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
