//! `weak3d`: synthesize data, bootstrap 3D labels, refine them, evaluate
//! and plot.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod cmd;
mod config;
mod error;
mod split;

use config::PipelineConfig;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "weak3d", version, about = "Weakly supervised 3D labels from 2D boxes")]
struct Cli {
    /// TOML configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

/// Dataset location and seed, shared by several subcommands.
#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset root holding `{split}/label_2`, `calib`, ...
    #[arg(long, env = "WEAK3D_DATA_ROOT")]
    root: Option<PathBuf>,
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic split in the benchmark layout.
    Synth(cmd::synth::SynthArgs),
    /// Fit initial 3D boxes inside the frustum of every 2D box.
    InitLabels(cmd::init_labels::InitArgs),
    /// Refine initial labels over self-training rounds.
    Refine(cmd::refine::RefineArgs),
    /// AP40 of a prediction directory against a ground-truth directory.
    Eval(cmd::eval::EvalArgs),
    /// Compare analytic GIoU gradients with finite differences.
    CheckGradients(cmd::gradients::GradientArgs),
    /// Render reports and BEV scenes as SVG.
    Plot(cmd::plot::PlotArgs),
}

impl DataArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(r) = &self.root {
            cfg.data_root = Some(r.clone());
        }
        if let Some(s) = &self.split {
            cfg.split = s.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    match &cli.command {
        Command::Synth(a) => a.data.apply(&mut cfg),
        Command::InitLabels(a) => a.data.apply(&mut cfg),
        Command::Refine(a) => a.data.apply(&mut cfg),
        Command::CheckGradients(a) => {
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
        }
        Command::Eval(_) | Command::Plot(_) => {}
    }
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.into()))?;
    }
    match cli.command {
        Command::Synth(a) => cmd::synth::run(a, cfg),
        Command::InitLabels(a) => cmd::init_labels::run(a, cfg),
        Command::Refine(a) => cmd::refine::run(a, cfg),
        Command::Eval(a) => cmd::eval::run(a, cfg),
        Command::CheckGradients(a) => cmd::gradients::run(a, cfg),
        Command::Plot(a) => cmd::plot::run(a, cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
