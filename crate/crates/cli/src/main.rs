//! `venuelab`: batch front-end for simulation, estimation and welfare runs.
//!
//! Every command reads the run configuration, does one pipeline stage, and
//! writes its outputs plus a `<command>.config` sidecar with the fully
//! resolved configuration into the output directory.

mod chart;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use venuelab::config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "venuelab",
    version,
    about = "Local legal labor markets: simulate, estimate, evaluate"
)]
struct Cli {
    /// Run configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the [io] section.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to `out_dir` from the [io] section.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic county-year panel.
    Simulate,
    /// Calibrate the production constants from the skill share, premium and elasticity.
    Calibrate,
    /// Fixed-effects employment regressions with linear-combination and placebo tests.
    Regress {
        /// Panel file; defaults to the [io] panel name inside the output directory.
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Two-step clustered GMM estimates of the supply elasticities and returns to scale.
    Gmm {
        /// Panel file; defaults to the [io] panel name inside the output directory.
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Consumption-equivalent welfare of removing forum shopping.
    Welfare {
        /// Panel file; defaults to the [io] panel name inside the output directory.
        #[arg(long)]
        panel: Option<PathBuf>,
    },
    /// Employment gains lost to forum shopping.
    Gains {
        /// Panel file; defaults to the [io] panel name inside the output directory.
        #[arg(long)]
        panel: Option<PathBuf>,
        /// Coefficient table written by `regress`.
        #[arg(long)]
        coefficients: Option<PathBuf>,
    },
    /// Summarise every output found in a run directory.
    Report {
        /// Run directory; defaults to the output directory.
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> venuelab::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.io.out_dir));
    let ctx = commands::Context::new(cfg, out)?;
    match cli.command {
        Command::Simulate => ctx.simulate(),
        Command::Calibrate => ctx.calibrate(),
        Command::Regress { panel } => ctx.regress(panel),
        Command::Gmm { panel } => ctx.gmm(panel),
        Command::Welfare { panel } => ctx.welfare(panel),
        Command::Gains {
            panel,
            coefficients,
        } => ctx.gains(panel, coefficients),
        Command::Report { run_dir } => ctx.report(run_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", e.category());
            ExitCode::from(2)
        }
    }
}
