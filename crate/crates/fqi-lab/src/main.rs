use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fqi_lab::commands::{self, Ctx};
use fqi_lab::config::ExperimentConfig;
use fqi_lab::Failure;

/// Seeded experiment driver: datasets, reference fits, decay-rate sweeps,
/// tabular diagnostics, and online runs, each leaving a reproducibility
/// manifest next to its artifacts.
#[derive(Parser)]
#[command(name = "fqi-lab", version)]
struct Cli {
    /// Experiment config file (TOML; unknown keys are rejected).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the config file.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory, overriding the config file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = library default), overriding the config file.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Print the work plan without computing or writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an offline mountain-car transition dataset as CSV.
    GenerateData,
    /// Fit the large-sample reference policy and record its value.
    BuildReference,
    /// Run the (sample size x trial) gap sweep and fit the decay rate.
    Sweep,
    /// Re-fit the decay rate from an existing sweep results file.
    RateFit,
    /// Stability and curvature diagnostics on a seeded tabular instance.
    Diagnose,
    /// Two-phase online runs with per-episode regret traces.
    Online,
    /// Telescope and contraction checks over random tabular instances.
    TabularVerify,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (cfg, config_text) = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            (ExperimentConfig::from_toml(&text)?, text)
        }
        None => (ExperimentConfig::default(), String::new()),
    };
    let seed = cli.seed.or(cfg.seed).ok_or_else(|| {
        Failure::Config("a master seed is required: set `seed` in the config or pass --seed".into())
    })?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.as_deref().map(PathBuf::from))
        .ok_or_else(|| {
            Failure::Config(
                "an output directory is required: set `out` in the config or pass --out".into(),
            )
        })?;
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    let ctx = Ctx {
        cfg,
        config_text,
        seed,
        out,
        threads,
        dry_run: cli.dry_run,
    };
    match cli.command {
        Command::GenerateData => commands::cmd_generate_data(&ctx),
        Command::BuildReference => commands::cmd_build_reference(&ctx),
        Command::Sweep => commands::cmd_sweep(&ctx),
        Command::RateFit => commands::cmd_rate_fit(&ctx),
        Command::Diagnose => commands::cmd_diagnose(&ctx),
        Command::Online => commands::cmd_online(&ctx),
        Command::TabularVerify => commands::cmd_tabular_verify(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
