//! Command-line harness for particle-policy experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pfpn::harness::{
    cmd_density, cmd_eval, cmd_probe_variance, cmd_sweep, cmd_train, load_config,
};

#[derive(Parser)]
#[command(
    name = "pfpn",
    about = "Particle-policy training and benchmark harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (JSON, closed schema)
    #[arg(long)]
    config: PathBuf,
    /// Override config keys, e.g. --override trainer.lr=0.001
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Override the run seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the rollout worker count
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> pfpn::Result<pfpn::harness::ExperimentConfig> {
        let mut config = load_config(&self.config, &self.overrides)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out_dir = Some(out.to_string_lossy().into_owned());
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write metrics/particles/events CSVs plus a checkpoint
    Train(ConfigArgs),
    /// Evaluate a checkpoint with deterministic actions
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Checkpoint produced by `train`
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of evaluation episodes
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
    /// Histogram stochastic action samples from a checkpoint
    Density {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of stochastic samples
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Estimate the policy-gradient variance across particle counts
    ProbeVariance {
        /// Particle counts, comma separated
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,35,100")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a training run across seeds (default 0..4)
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Seeds, comma separated
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
    },
}

fn run() -> pfpn::Result<()> {
    match Cli::parse().command {
        Command::Train(args) => {
            let config = args.load()?;
            let artifacts = cmd_train(config)?;
            println!("run complete: {}", artifacts.out_dir.display());
        }
        Command::Eval {
            config,
            checkpoint,
            episodes,
        } => {
            let cfg = config.load()?;
            let out = config.out.clone().or_else(|| {
                checkpoint
                    .parent()
                    .map(|dir| dir.join("eval.csv"))
            });
            let summary = cmd_eval(&checkpoint, &cfg, episodes, out.as_deref())?;
            println!(
                "eval over {} episodes: mean {} std {}",
                summary.returns.len(),
                summary.mean,
                summary.std
            );
            if let Some(path) = out {
                println!("per-episode rows: {}", path.display());
            }
        }
        Command::Density {
            config,
            checkpoint,
            samples,
        } => {
            let cfg = config.load()?;
            let out_dir = config
                .out
                .clone()
                .or_else(|| checkpoint.parent().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            let paths = cmd_density(&checkpoint, &cfg, samples, &out_dir, cfg.seed)?;
            for p in paths {
                println!("density histogram: {}", p.display());
            }
        }
        Command::ProbeVariance {
            n,
            samples,
            seed,
            out,
        } => {
            let report = cmd_probe_variance(&n, samples, seed, out.as_deref())?;
            println!("n,pfpn_variance,discrete_variance");
            for row in &report.rows {
                println!("{},{},{}", row.n, row.pfpn_variance, row.discrete_variance);
            }
        }
        Command::Sweep { config, seeds } => {
            let cfg = config.load()?;
            let artifacts = cmd_sweep(&cfg, &seeds)?;
            for a in artifacts {
                println!("run complete: {}", a.out_dir.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
