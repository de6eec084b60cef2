use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use subspace_core::experiments::{run, ExperimentConfig, ExperimentKind};

/// Monte Carlo experiments for kernel-PCA subspace estimation.
#[derive(Parser)]
#[command(name = "subspace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; output does not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Reference spectrum, decay fit and bound curves.
    Spectrum,
    /// Reconstruction error against truncation level.
    Plateau,
    /// Round-off of explicit pseudo-inverse distances in 32 and 64 bits.
    Instability,
    /// Learning-rate exponents against eigenvalue decay.
    Rates,
    /// Support recovery and Hausdorff error.
    Support,
    /// Concentration of the whitened covariance deviation.
    Concentration,
}

impl From<Command> for ExperimentKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Spectrum => ExperimentKind::Spectrum,
            Command::Plateau => ExperimentKind::Plateau,
            Command::Instability => ExperimentKind::Instability,
            Command::Rates => ExperimentKind::Rates,
            Command::Support => ExperimentKind::Support,
            Command::Concentration => ExperimentKind::Concentration,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = ExperimentKind::from(cli.command);
    let config = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path, kind),
        None => Ok(ExperimentConfig::defaults(kind)),
    };
    let result = config.and_then(|mut c| {
        if let Some(seed) = cli.seed {
            c.seed = seed;
        }
        if let Some(out) = cli.out {
            c.output_dir = out;
        }
        if let Some(w) = cli.workers {
            c.workers = w;
        }
        run(&c)
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
