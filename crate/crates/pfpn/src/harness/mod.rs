//! CLI entry point, experiment configuration, checkpointing, and CSV logging.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod csv;

pub use checkpoint::{load_head, read_checkpoint, save_head, write_checkpoint};
pub use commands::{
    cmd_density, cmd_eval, cmd_probe_variance, cmd_sweep, cmd_train, out_root, EvalSummary,
    RunArtifacts,
};
pub use config::{apply_override, load_config, write_resolved, EnvConfig, ExperimentConfig, HeadConfig};
