use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dictsel_cli::{
    run_identify, run_noise_sweep, run_pde_identify, run_screening_study, run_simulate, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "dictsel", version, about = "Dictionary selection experiments for sparse system identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for replicate loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate trajectory and grid data.
    Simulate,
    /// Transform, score, select and refit one dataset.
    Identify,
    /// Support-recovery rates over noise levels.
    Sweep,
    /// Coefficient error of screened STLS.
    Screen,
    /// Weak-form PDE identification.
    PdeIdentify,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DICTSEL_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<PathBuf> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("dictsel-out"));
    let report = match cli.command {
        Command::Simulate => run_simulate(&config, &out)?,
        Command::Identify => run_identify(&config, &out)?,
        Command::Sweep => run_noise_sweep(&config, &out)?,
        Command::Screen => run_screening_study(&config, &out)?,
        Command::PdeIdentify => run_pde_identify(&config, &out)?,
    };
    Ok(report.manifest_path())
}
