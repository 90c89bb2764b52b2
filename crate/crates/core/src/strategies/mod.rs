//! Player policies. Every policy sees only its own realized reward and
//! answers with the mixed strategy it plays next and the sampled action.

mod baselines;
mod berts;
mod bewas;
mod bfpls;
pub mod laplace;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::common::{MixedStrategy, Purpose, RngStream, StreamId};
use crate::error::{Error, Result};

pub use baselines::{
    centralized_no_collision, centralized_optimal, colliding, EpsGreedy, FixedAction, Greedy, UniformRandom,
};
pub use berts::{Berts, BertsConfig, PeriodRecord};
pub use bewas::{exponential_pair_weights, known_horizon_rates, Bewas, BewasConfig, BewasSchedule};
pub use bfpls::{Bfpls, BfplsConfig, ConfidenceShift};

/// The random streams owned by one player.
#[derive(Debug, Clone)]
pub struct PlayerRngs {
    pub sampling: RngStream,
    pub perturbation: RngStream,
    pub reset: RngStream,
}

impl PlayerRngs {
    pub fn new(seed: u64, player: usize) -> Self {
        PlayerRngs {
            sampling: RngStream::new(seed, StreamId::player(player, Purpose::ActionSampling)),
            perturbation: RngStream::new(seed, StreamId::player(player, Purpose::Perturbation)),
            reset: RngStream::new(seed, StreamId::player(player, Purpose::StrategyReset)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: usize,
    /// The distribution `action` was drawn from (a point mass for forced plays).
    pub strategy: MixedStrategy,
}

pub trait Policy: Send {
    /// Chooses the next play. `last_reward` is the reward observed for the
    /// previous decision and is `None` only before the first one.
    fn step(&mut self, last_reward: Option<f64>, rngs: &mut PlayerRngs) -> Result<Decision>;

    fn kind(&self) -> &'static str;

    /// Resolved parameters, including every default, for run metadata.
    fn parameters(&self) -> BTreeMap<String, Value>;

    /// Completed regret-testing periods, for policies that have them.
    fn periods(&self) -> Option<&[PeriodRecord]> {
        None
    }
}

/// Reward of the previous play, which every step after the first needs.
pub(crate) fn require_reward(last_reward: Option<f64>, started: bool) -> Result<Option<f64>> {
    match (started, last_reward) {
        (false, _) => Ok(None),
        (true, Some(r)) if r.is_finite() => Ok(Some(r)),
        (true, Some(r)) => Err(Error::domain(format!("non-finite reward {r}"))),
        (true, None) => Err(Error::domain("missing reward for the previous play")),
    }
}

fn default_schedule() -> BewasSchedule {
    BewasSchedule::Unknown
}

/// A policy as declared in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    Bewas {
        #[serde(default = "default_schedule")]
        schedule: BewasSchedule,
    },
    Bfpls {
        #[serde(default)]
        shift: ConfidenceShift,
        /// Estimate pair probabilities by sampling instead of integrating.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        monte_carlo_samples: Option<usize>,
    },
    Berts {
        period: usize,
        threshold: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reset_probability: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exploration_trials: Option<usize>,
    },
    Uniform,
    EpsGreedy {
        epsilon: f64,
    },
    Greedy {
        explore_fraction: f64,
    },
    CentralizedOptimal,
    CentralizedNoCollision,
}

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_EXPLORE_FRACTION: f64 = 0.1;

impl StrategySpec {
    pub fn label(&self) -> &'static str {
        match self {
            StrategySpec::Bewas {
                schedule: BewasSchedule::Known,
            } => "bewas_known",
            StrategySpec::Bewas { .. } => "bewas",
            StrategySpec::Bfpls {
                shift: ConfidenceShift::Optimistic,
                ..
            } => "bfpls_optimistic",
            StrategySpec::Bfpls { .. } => "bfpls",
            StrategySpec::Berts { .. } => "berts",
            StrategySpec::Uniform => "uniform",
            StrategySpec::EpsGreedy { .. } => "eps_greedy",
            StrategySpec::Greedy { .. } => "greedy",
            StrategySpec::CentralizedOptimal => "centralized_optimal",
            StrategySpec::CentralizedNoCollision => "centralized_no_collision",
        }
    }

    pub fn is_centralized(&self) -> bool {
        matches!(
            self,
            StrategySpec::CentralizedOptimal | StrategySpec::CentralizedNoCollision
        )
    }

    /// Parses the command-line form `NAME` or `NAME=key:value,key:value`.
    /// A bare value is accepted for single-parameter kinds, e.g.
    /// `eps_greedy=0.1` or `bewas=known`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, params) = match text.split_once('=') {
            Some((n, p)) => (n.trim(), p.trim()),
            None => (text.trim(), ""),
        };
        let mut map = BTreeMap::new();
        let mut bare = None;
        for item in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.split_once(':') {
                Some((k, v)) => {
                    map.insert(k.trim().to_string(), v.trim().to_string());
                }
                None if bare.is_none() => bare = Some(item.to_string()),
                None => return Err(Error::config(format!("unexpected parameter '{item}' in '{text}'"))),
            }
        }
        let mut take = |key: &str| map.remove(key);
        let number = |value: Option<String>, key: &str| -> Result<Option<f64>> {
            value
                .map(|v| v.parse::<f64>().map_err(|_| Error::config(format!("{key}: '{v}' is not a number"))))
                .transpose()
        };
        let integer = |value: Option<String>, key: &str| -> Result<Option<usize>> {
            value
                .map(|v| v.parse::<usize>().map_err(|_| Error::config(format!("{key}: '{v}' is not an integer"))))
                .transpose()
        };
        let spec = match name {
            "bewas" => {
                let schedule = match take("schedule").or(bare.take()).as_deref() {
                    None | Some("unknown") => BewasSchedule::Unknown,
                    Some("known") => BewasSchedule::Known,
                    Some(other) => return Err(Error::config(format!("unknown bewas schedule '{other}'"))),
                };
                StrategySpec::Bewas { schedule }
            }
            "bfpls" => StrategySpec::Bfpls {
                shift: match take("shift").or(bare.take()).as_deref() {
                    None | Some("pessimistic") => ConfidenceShift::Pessimistic,
                    Some("optimistic") => ConfidenceShift::Optimistic,
                    Some(other) => return Err(Error::config(format!("unknown bfpls shift '{other}'"))),
                },
                monte_carlo_samples: integer(take("samples"), "samples")?,
            },
            "berts" => StrategySpec::Berts {
                period: integer(take("period"), "period")?
                    .ok_or_else(|| Error::config("berts needs period:T"))?,
                threshold: number(take("threshold"), "threshold")?
                    .ok_or_else(|| Error::config("berts needs threshold:rho"))?,
                reset_probability: number(take("reset"), "reset")?,
                exploration_trials: integer(take("explore"), "explore")?,
            },
            "uniform" => StrategySpec::Uniform,
            "eps_greedy" => StrategySpec::EpsGreedy {
                epsilon: number(take("epsilon").or(bare.take()), "epsilon")?.unwrap_or(DEFAULT_EPSILON),
            },
            "greedy" => StrategySpec::Greedy {
                explore_fraction: number(take("fraction").or(bare.take()), "fraction")?
                    .unwrap_or(DEFAULT_EXPLORE_FRACTION),
            },
            "centralized_optimal" => StrategySpec::CentralizedOptimal,
            "centralized_no_collision" => StrategySpec::CentralizedNoCollision,
            other => return Err(Error::config(format!("unknown strategy '{other}'"))),
        };
        if let Some(key) = map.keys().next() {
            return Err(Error::config(format!("unknown parameter '{key}' for {name}")));
        }
        if let Some(v) = bare {
            return Err(Error::config(format!("unexpected parameter '{v}' for {name}")));
        }
        Ok(spec)
    }

    /// Builds a decentralized policy. Centralized kinds need the jointly
    /// optimized action, passed as `assigned`.
    pub fn build(&self, num_actions: usize, horizon: u64, assigned: Option<usize>) -> Result<Box<dyn Policy>> {
        if num_actions == 0 {
            return Err(Error::config("player without actions"));
        }
        Ok(match *self {
            StrategySpec::Bewas { schedule } => {
                let cfg = match schedule {
                    BewasSchedule::Known => BewasConfig::known(num_actions, horizon)?,
                    BewasSchedule::Unknown => BewasConfig::unknown(num_actions),
                };
                Box::new(Bewas::new(cfg))
            }
            StrategySpec::Bfpls {
                shift,
                monte_carlo_samples,
            } => {
                let mut cfg = BfplsConfig::new(num_actions, horizon)?;
                cfg.shift = shift;
                cfg.monte_carlo_samples = monte_carlo_samples;
                Box::new(Bfpls::new(cfg))
            }
            StrategySpec::Berts {
                period,
                threshold,
                reset_probability,
                exploration_trials,
            } => Box::new(Berts::new(BertsConfig::new(
                num_actions,
                period,
                threshold,
                reset_probability,
                exploration_trials,
            )?)),
            StrategySpec::Uniform => Box::new(UniformRandom::new(num_actions)),
            StrategySpec::EpsGreedy { epsilon } => Box::new(EpsGreedy::new(num_actions, epsilon)?),
            StrategySpec::Greedy { explore_fraction } => {
                Box::new(Greedy::new(num_actions, explore_fraction, horizon)?)
            }
            StrategySpec::CentralizedOptimal | StrategySpec::CentralizedNoCollision => {
                let action = assigned.ok_or_else(|| {
                    Error::config(format!("{} needs a centrally assigned action", self.label()))
                })?;
                Box::new(FixedAction::new(self.label(), num_actions, action)?)
            }
        })
    }
}
