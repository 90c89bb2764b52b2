use crate::common::ActionSpace;
use crate::env::{ChannelModel, GainInterval, NoiseModel, RewardNormalizer};
use crate::error::{Error, Result};
use crate::strategies::{BewasSchedule, StrategySpec};

use super::config::{ScenarioConfig, DEFAULT_CHECKPOINT_STRIDE, SCHEMA_VERSION};

pub const PRESETS: [&str; 3] = ["part_one", "part_one_stationary", "part_two"];

/// The horizon of the two-user experiment is not published; this one is
/// long enough for the mixed strategies to settle visibly.
pub const PART_ONE_HORIZON: u64 = 100_000;
pub const PART_ONE_POWERS: [f64; 2] = [1.0, 5.0];
pub const PART_ONE_PRICE: f64 = 1e-3;
/// Receiver noise power; not published.
pub const DEFAULT_NOISE_POWER: f64 = 0.1;

const PART_TWO: &str = include_str!("../../fixtures/part_two.toml");

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    match name {
        "part_one" => Ok(part_one()),
        "part_one_stationary" => {
            let mut cfg = part_one();
            cfg.name = name.to_string();
            cfg.stationary = true;
            Ok(cfg)
        }
        "part_two" => ScenarioConfig::from_toml(PART_TWO),
        other => Err(Error::config(format!(
            "unknown preset '{other}' (known: {})",
            PRESETS.join(", ")
        ))),
    }
}

/// Gain intervals of the two-user, two-channel network, `[channel][tx][rx]`.
pub fn part_one_channel() -> ChannelModel {
    let g = GainInterval::new;
    ChannelModel::new(
        vec![
            vec![vec![g(0.50, 0.80), g(0.15, 0.20)], vec![g(0.01, 0.05), g(0.01, 0.09)]],
            vec![vec![g(0.02, 0.05), g(0.02, 0.06)], vec![g(0.05, 0.15), g(0.75, 0.95)]],
        ],
        DEFAULT_NOISE_POWER,
        PART_ONE_PRICE,
    )
    .expect("published intervals are valid")
}

fn part_one() -> ScenarioConfig {
    let space = ActionSpace::new(2, PART_ONE_POWERS.to_vec()).expect("valid powers");
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: "part_one".into(),
        horizon: PART_ONE_HORIZON,
        seeds: (0..10).collect(),
        checkpoint_stride: DEFAULT_CHECKPOINT_STRIDE,
        ce_checkpoints: vec![1_000, 10_000, 100_000],
        stationary: false,
        noise: NoiseModel::default(),
        normalizer: RewardNormalizer::default(),
        spaces: vec![space.clone(), space],
        strategies: vec![
            StrategySpec::Bewas {
                schedule: BewasSchedule::Unknown
            };
            2
        ],
        channel: part_one_channel(),
    }
}
