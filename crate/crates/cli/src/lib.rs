//! Stage orchestration for the `alignet` command.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

use std::path::{Path, PathBuf};

pub use config::PipelineConfig;
pub use error::CliError;
pub use stages::{run_pipeline, run_stage, Ctx, Stage};

/// Loads `config`, applies overrides and runs one stage, or all of them when `stage` is `None`.
pub fn run(config: &Path, stage: Option<Stage>, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
    let ctx = Ctx::new(cfg, &base, out);
    match stage {
        Some(s) => run_stage(&ctx, s),
        None => run_pipeline(&ctx),
    }
}
