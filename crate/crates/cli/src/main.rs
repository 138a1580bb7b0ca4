use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lincov_fidelity::study::{default_config, run_study, StudyConfig};

/// LinCov fidelity study runner for the cislunar NRHO experiment.
#[derive(Debug, Parser)]
#[command(name = "lincov-fidelity", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the study and write metrics.csv, run_manifest.json and sample dumps.
    Run(RunArgs),
    /// Print the default configuration as TOML.
    DefaultConfig,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file (defaults to the built-in reference study).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `monte_carlo.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample count (overrides `monte_carlo.samples`).
    #[arg(long)]
    samples: Option<usize>,
    /// Number of grid nodes (overrides `grid.count`).
    #[arg(long)]
    grid_count: Option<usize>,
    #[arg(long)]
    no_mc: bool,
    #[arg(long)]
    no_second_order: bool,
    #[arg(long)]
    no_ut: bool,
    /// Dump the Monte Carlo cloud at the grid node nearest to this time [TU].
    #[arg(long = "dump-samples", value_name = "T")]
    dump_samples: Vec<f64>,
}

fn build_config(args: &RunArgs) -> Result<StudyConfig> {
    let mut cfg = match &args.config {
        Some(path) => StudyConfig::from_file(path)?,
        None => default_config(),
    };
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.monte_carlo.seed = seed;
    }
    if let Some(n) = args.samples {
        cfg.monte_carlo.samples = n;
    }
    if let Some(n) = args.grid_count {
        cfg.grid.count = n;
    }
    cfg.variants.monte_carlo &= !args.no_mc;
    cfg.variants.second_order &= !args.no_second_order;
    cfg.variants.unscented &= !args.no_ut;
    cfg.output.dump_samples.extend(&args.dump_samples);
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::DefaultConfig => {
            print!("{}", default_config().to_toml_string()?);
        }
        Command::Run(args) => {
            let cfg = build_config(&args)?;
            let run = run_study(&cfg).with_context(|| "study failed")?;
            let p = &run.results.phases;
            eprintln!(
                "wrote {} rows to {} ({:.1} s: variational {:.1}, unscented {:.1}, monte carlo {:.1}, metrics {:.1})",
                run.results.reports.len(),
                run.metrics_path.display(),
                p.total,
                p.variational,
                p.unscented,
                p.monte_carlo,
                p.metrics
            );
            for d in &run.dump_paths {
                eprintln!("wrote {}", d.display());
            }
        }
    }
    Ok(())
}
