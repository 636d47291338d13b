//! Shared configuration flags: profile selection, config file, overrides.
//!
//! Precedence, lowest to highest: profile defaults, `--config` file entries
//! (flat `key = value` lines, `#` comments), repeated `--set key=value`
//! flags, then the dedicated convenience flags.

use std::path::PathBuf;

use clap::{Args, ValueEnum};

use axsnn_core::{Error, Result, SweepConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Profile {
    /// Short time-step grid (8..24) and a small dense architecture.
    Desk,
    /// Full-scale time-step grid (32..80).
    Full,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Base parameter profile.
    #[arg(long, value_enum, default_value = "desk")]
    pub profile: Profile,

    /// Flat `key = value` configuration file applied on top of the profile.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override one configuration key (repeatable), e.g. --set quality=85.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Seed for training, encodings, and attacks.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Quality level Q in percent.
    #[arg(long)]
    pub quality: Option<f64>,

    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,

    /// Directory for trained-network checkpoints.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn build(&self) -> Result<SweepConfig> {
        let base = match self.profile {
            Profile::Desk => SweepConfig::desk(),
            Profile::Full => SweepConfig::full_scale(),
        };
        let mut cfg = match &self.config {
            Some(path) => {
                let text = crate::annotate(
                    std::fs::read_to_string(path).map_err(Error::from),
                    path,
                )?;
                base.with_key_values(&text)?
            }
            None => base,
        };
        for entry in &self.set {
            let (key, value) = entry.split_once('=').ok_or_else(|| {
                Error::Config(format!("--set expects KEY=VALUE, got '{entry}'"))
            })?;
            cfg.apply_key_value(key.trim(), value.trim())?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(quality) = self.quality {
            cfg.quality = quality;
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        if let Some(dir) = &self.cache_dir {
            cfg.cache_dir = Some(dir.clone());
        }
        Ok(cfg)
    }
}
