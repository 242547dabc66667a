use std::path::{Path, PathBuf};

use clap::Args;
use metaplan::env::EnvConfig;
use metaplan::policy::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Settings read from the optional TOML file before flags are applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct EnvFlags {
    /// Discount factor in [0, 1]
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub goal_reward: Option<f64>,
    /// Reward for steps applying two or more operators
    #[arg(long)]
    pub meta_reward: Option<f64>,
    /// Episode step cap
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Maximum operators per step
    #[arg(long, short = 'L')]
    pub degree: Option<usize>,
}

impl EnvFlags {
    pub fn apply(&self, cfg: &mut EnvConfig) {
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.goal_reward {
            cfg.goal_reward = v;
        }
        if let Some(v) = self.meta_reward {
            cfg.meta_reward = v;
        }
        if let Some(v) = self.max_steps {
            cfg.max_steps = v;
        }
        if let Some(v) = self.degree {
            cfg.degree = v;
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub gradient_steps: Option<usize>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub entropy: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl TrainFlags {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.episodes {
            cfg.episodes_per_iteration = v;
        }
        if let Some(v) = self.gradient_steps {
            cfg.gradient_steps = v;
        }
        if let Some(v) = self.clip {
            cfg.clip_epsilon = v;
        }
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.entropy {
            cfg.entropy_coef = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }
}
