use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::common::ActionSpace;
use crate::env::{ChannelModel, NoiseModel, RewardNormalizer};
use crate::error::{Error, Result};
use crate::strategies::StrategySpec;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_CHECKPOINT_STRIDE: u64 = 100;

fn default_stride() -> u64 {
    DEFAULT_CHECKPOINT_STRIDE
}

/// Everything one simulation batch needs. Stored as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    /// Rows are recorded every `checkpoint_stride` trials and at the horizon.
    #[serde(default = "default_stride")]
    pub checkpoint_stride: u64,
    /// Trials after which the distance of the empirical joint play to the
    /// correlated equilibria is measured.
    #[serde(default)]
    pub ce_checkpoints: Vec<u64>,
    /// Fix every gain at its interval midpoint.
    #[serde(default)]
    pub stationary: bool,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub normalizer: RewardNormalizer,
    pub spaces: Vec<ActionSpace>,
    pub strategies: Vec<StrategySpec>,
    pub channel: ChannelModel,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("scenario: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ScenarioConfig = toml::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("scenario serialization: {e}")))
    }

    pub fn num_players(&self) -> usize {
        self.spaces.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("no seeds"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("duplicate seeds"));
        }
        if self.checkpoint_stride == 0 {
            return Err(Error::config("checkpoint stride must be at least 1"));
        }
        if self.ce_checkpoints.iter().any(|&t| t == 0 || t > self.horizon) {
            return Err(Error::config("correlated-equilibrium checkpoints must lie in 1..=horizon"));
        }
        if self.ce_checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("correlated-equilibrium checkpoints must be strictly increasing"));
        }
        if self.spaces.is_empty() {
            return Err(Error::config("no players"));
        }
        self.channel.check_spaces(&self.spaces)?;
        if self.strategies.len() != self.spaces.len() {
            return Err(Error::config(format!(
                "{} strategies for {} players",
                self.strategies.len(),
                self.spaces.len()
            )));
        }
        NoiseModel::new(self.noise.half_width)?;
        for (k, (spec, space)) in self.strategies.iter().zip(&self.spaces).enumerate() {
            spec.build(space.num_actions(), self.horizon, Some(0))
                .map_err(|e| Error::config(format!("player {}: {e}", k + 1)))?;
        }
        Ok(())
    }

    /// Label of the strategy mix, e.g. `bewas` or `bewas+berts`.
    pub fn strategy_label(&self) -> String {
        let labels: Vec<&str> = self.strategies.iter().map(StrategySpec::label).collect();
        if labels.iter().all(|l| *l == labels[0]) {
            labels[0].to_string()
        } else {
            labels.join("+")
        }
    }
}

/// Parses `a..b` (exclusive), `a..=b`, or a single seed.
pub fn parse_seed_range(text: &str) -> Result<Vec<u64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| Error::config(format!("bad seed '{s}' in '{text}'")))
    };
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        vec![num(text)?]
    };
    if seeds.is_empty() {
        return Err(Error::config(format!("seed range '{text}' is empty")));
    }
    Ok(seeds)
}
