//! The harness commands behind the CLI subcommands: train, eval, density,
//! probe-variance, and sweep.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{make_env, Environment};
use crate::error::{Error, Result};
use crate::harness::checkpoint::{load_head, save_head};
use crate::harness::config::{write_resolved, ExperimentConfig};
use crate::harness::csv::{EventsWriter, MetricsWriter, ParticlesWriter};
use crate::numerics::{Activation, Mlp};
use crate::policy::{HeadKind, PolicyHead};
use crate::trainer::{evaluate, variance_probe, Trainer, VarianceProbeReport};

/// Files produced by one training run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub metrics: PathBuf,
    pub particles: PathBuf,
    pub events: PathBuf,
    pub checkpoint: PathBuf,
    pub resolved_config: PathBuf,
}

/// Default output root: `$PFPN_OUT_DIR` when set, else `runs`.
pub fn out_root() -> PathBuf {
    std::env::var_os("PFPN_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn build_env(config: &ExperimentConfig) -> Result<Box<dyn Environment>> {
    make_env(&config.env.name, config.env.dims)
}

/// Builds the policy head described by the config; the init rng stream is
/// derived from the run seed.
pub fn build_head(config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<PolicyHead<f64>> {
    let env = build_env(config)?;
    let spec = env.spec();
    let h = &config.head;
    match h.kind {
        HeadKind::Pfpn => {
            PolicyHead::pfpn(spec.obs_dim, &h.hidden, h.particles, spec.action_dim, rng)
        }
        HeadKind::Gaussian => PolicyHead::gaussian(
            spec.obs_dim,
            &h.hidden,
            spec.action_dim,
            h.gaussian_init_std,
            rng,
        ),
        HeadKind::Discrete => {
            PolicyHead::discrete(spec.obs_dim, &h.hidden, h.particles, spec.action_dim, rng)
        }
        HeadKind::Gmm => {
            PolicyHead::gmm(spec.obs_dim, &h.hidden, h.particles, spec.action_dim, rng)
        }
    }
}

fn build_value(config: &ExperimentConfig, obs_dim: usize, rng: &mut ChaCha8Rng) -> Mlp<f64> {
    let mut sizes = vec![obs_dim];
    sizes.extend_from_slice(&config.head.hidden);
    sizes.push(1);
    Mlp::he_init(&sizes, Activation::Identity, rng)
}

/// Runs one training experiment to its iteration budget, streaming metrics,
/// particle snapshots, and resampling events to CSV, then writes the final
/// checkpoint. The resolved config is embedded in the run directory so the
/// run is reproducible from its artifacts alone.
pub fn cmd_train(mut config: ExperimentConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let out_dir = config
        .out_dir
        .clone()
        .map(PathBuf::from)
        .unwrap_or_else(|| out_root().join(config.run_name()));
    std::fs::create_dir_all(&out_dir)?;
    config.out_dir = Some(out_dir.to_string_lossy().into_owned());

    let artifacts = RunArtifacts {
        metrics: out_dir.join("metrics.csv"),
        particles: out_dir.join("particles.csv"),
        events: out_dir.join("events.csv"),
        checkpoint: out_dir.join("checkpoint.bin"),
        resolved_config: out_dir.join("config.resolved.json"),
        out_dir,
    };
    write_resolved(&config, &artifacts.resolved_config)?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_rng.set_stream(0);
    let head = build_head(&config, &mut init_rng)?;
    let obs_dim = head.obs_dim();
    let value = build_value(&config, obs_dim, &mut init_rng);

    let envs: Vec<Box<dyn Environment>> = (0..config.workers)
        .map(|_| build_env(&config))
        .collect::<Result<_>>()?;
    let eval_env = build_env(&config)?;

    let mut trainer = Trainer::new(
        head,
        value,
        envs,
        eval_env,
        config.trainer,
        config.resample,
        config.eval,
        config.seed,
    )?;

    let mut metrics = MetricsWriter::create(&artifacts.metrics)?;
    let mut particles = ParticlesWriter::create(&artifacts.particles)?;
    let mut events = EventsWriter::create(&artifacts.events)?;
    let run_result = trainer.run(|report| {
        metrics.write_row(&report)?;
        particles.write_rows(&report)?;
        events.write_rows(&report)?;
        Ok(())
    });
    metrics.finish()?;
    particles.finish()?;
    events.finish()?;
    // a final checkpoint is written even when the loop aborted mid-way
    save_head(&artifacts.checkpoint, trainer.head(), trainer.value_net())?;
    run_result?;
    Ok(artifacts)
}

/// Evaluation summary over deterministic-action rollouts.
#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
}

/// Loads a checkpoint and runs `episodes` deterministic rollouts; optionally
/// writes per-episode rows to `out` as CSV.
pub fn cmd_eval(
    checkpoint: &Path,
    config: &ExperimentConfig,
    episodes: usize,
    out: Option<&Path>,
) -> Result<EvalSummary> {
    let (head, _value) = load_head(checkpoint)?;
    let mut env = build_env(config)?;
    if env.spec().action_dim != head.action_dims() {
        return Err(Error::Checkpoint {
            section: "meta".into(),
            message: format!(
                "checkpoint has {} action dims but env `{}` needs {}",
                head.action_dims(),
                config.env.name,
                env.spec().action_dim
            ),
        });
    }
    let (mean, returns) = evaluate(env.as_mut(), &head, episodes)?;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / returns.len().max(1) as f64;
    if let Some(path) = out {
        let mut text = String::from("episode,reward\n");
        for (i, r) in returns.iter().enumerate() {
            text.push_str(&format!("{i},{r}\n"));
        }
        std::fs::write(path, text)?;
    }
    Ok(EvalSummary {
        mean,
        std: var.sqrt(),
        returns,
    })
}

/// Draws stochastic action samples at the environment's reset observation and
/// bins them into a 200-bin histogram over `[-1, 1]` per action dimension.
/// Returns the written file paths (one per dimension; a single `density.csv`
/// for 1-D heads).
pub fn cmd_density(
    checkpoint: &Path,
    config: &ExperimentConfig,
    samples: usize,
    out_dir: &Path,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    const BINS: usize = 200;
    let (head, _value) = load_head(checkpoint)?;
    let mut env = build_env(config)?;
    let obs = env.reset();
    let m = head.action_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);

    let mut counts = vec![[0usize; BINS]; m];
    for _ in 0..samples {
        let s = head.sample(&obs, &mut rng)?;
        for (k, &a) in s.action.iter().enumerate() {
            let a = a.clamp(-1.0, 1.0);
            let bin = (((a + 1.0) / 2.0) * BINS as f64) as usize;
            counts[k][bin.min(BINS - 1)] += 1;
        }
    }

    std::fs::create_dir_all(out_dir)?;
    let width = 2.0 / BINS as f64;
    let mut paths = Vec::with_capacity(m);
    for (k, dim_counts) in counts.iter().enumerate() {
        let name = if m == 1 {
            "density.csv".to_string()
        } else {
            format!("density_dim{k}.csv")
        };
        let path = out_dir.join(name);
        let mut text = String::from("bin_center,density\n");
        for (b, c) in dim_counts.iter().enumerate() {
            let center = -1.0 + (b as f64 + 0.5) * width;
            let density = *c as f64 / (samples as f64 * width);
            text.push_str(&format!("{center},{density}\n"));
        }
        std::fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Runs the policy-gradient variance probe and optionally writes it as CSV.
pub fn cmd_probe_variance(
    n_list: &[usize],
    samples: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<VarianceProbeReport> {
    let report = variance_probe(n_list, samples, seed)?;
    if let Some(path) = out {
        let mut text = String::from("n,pfpn_variance,discrete_variance\n");
        for row in &report.rows {
            text.push_str(&format!(
                "{},{},{}\n",
                row.n, row.pfpn_variance, row.discrete_variance
            ));
        }
        std::fs::write(path, text)?;
    }
    Ok(report)
}

/// Repeats one experiment across seeds, one subdirectory per seed, each with
/// its own resolved config.
pub fn cmd_sweep(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<RunArtifacts>> {
    let base = config
        .out_dir
        .clone()
        .map(PathBuf::from)
        .unwrap_or_else(|| out_root().join(format!("sweep_{}", config.run_name())));
    let mut artifacts = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut per_seed = config.clone();
        per_seed.seed = seed;
        per_seed.out_dir = Some(
            base.join(format!("seed_{seed}"))
                .to_string_lossy()
                .into_owned(),
        );
        artifacts.push(cmd_train(per_seed)?);
    }
    Ok(artifacts)
}
