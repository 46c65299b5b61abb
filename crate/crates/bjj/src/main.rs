//! Command-line front end for the lossy Bose-Josephson junction simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bjj::scenario::{self, OutputFormat, ScenarioConfig};
use bjj::Error;

#[derive(Parser)]
#[command(
    name = "bjj",
    version,
    about = "Two-mode Bose-Josephson junction with two-body atom losses: \
             block master equation, quantum trajectories, conditional states \
             and quantum Fisher information",
    after_help = "CONFIG FILES are flat `key = value` text; `#` starts a comment. \
                  Rates are in units of 1/T and times in units of T = 2*pi/chi \
                  (chi defaults to 1). Common keys: n0, chi, chi1/chi2 or \
                  u1/u2/u12, gamma1, gamma2, gamma12, times (comma list), \
                  outputs (weights, mean_n, fisher_total, fisher_sector, \
                  density_block, husimi), seed, n_traj, block, rtol, atol, \
                  max_step, truncate (threshold or 'off'), fisher_mode \
                  (shared|per_sector), husimi_theta, husimi_phi, \
                  caption_energies (fig2/3/4 energy-convention switch), \
                  gamma1_min/gamma1_max/gamma1_points and husimi_markers \
                  (fig3), sweep.<param> = v1,v2,... (sweep). Any key can be \
                  overridden by the environment as BJJ_<KEY> (dots written as \
                  double underscores). Exit codes: 0 success, 1 configuration \
                  error, 2 numerical failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (flat key = value text).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for emitted tables.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Table format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Modulus of the (N0-2)-sector density matrix at t2, four panels.
    Fig2,
    /// Sector Fisher information vs loss rate at t2, four lines.
    Fig3,
    /// Total Fisher information and mean atom number vs time, four lines.
    Fig4,
    /// Generic master-equation run with configurable outputs.
    Evolve,
    /// Trajectory ensemble with logs and ensemble-vs-exact comparison.
    Trajectory,
    /// Cartesian parameter sweep, one row per grid point.
    Sweep,
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::empty(),
    };
    cfg.apply_env();
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let format = match cli.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    let written = match cli.command {
        Command::Fig2 => scenario::run_fig2(&cfg, &cli.out, format)?,
        Command::Fig3 => scenario::run_fig3(&cfg, &cli.out, format)?,
        Command::Fig4 => scenario::run_fig4(&cfg, &cli.out, format)?,
        Command::Evolve => scenario::run_evolve(&cfg, &cli.out, format)?,
        Command::Trajectory => scenario::run_trajectory(&cfg, &cli.out, format)?,
        Command::Sweep => scenario::run_sweep(&cfg, &cli.out, format)?,
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: failed to set thread count: {e}");
            return ExitCode::from(1);
        }
    }

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config(_) | Error::InvalidParameter(_))) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(2)
        }
    }
}
