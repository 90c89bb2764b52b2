use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::common::{ActionSpace, MixedStrategy, RngStream, StreamId};
use crate::env::{stationary_payoff_tensor, Environment, UtilityVariant};
use crate::equilibrium::{ce_distance, ce_violation, EmpiricalJointDistribution, PayoffTensor};
use crate::error::Result;
use crate::regret::{estimate_rewards, RegretLedger};
use crate::strategies::{centralized_no_collision, centralized_optimal, colliding, PlayerRngs, Policy, StrategySpec};
use crate::swap::{FIXED_POINT_MAX_ITERATIONS, FIXED_POINT_TOLERANCE};

use super::config::ScenarioConfig;
use super::trace::{CeRow, CheckpointRow, PlayerRow, RunTrace};

/// Diagnostics of one trial that strategies never see. A tap may rewrite
/// them; the play itself must not change.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub expected: Vec<f64>,
    pub counterfactual: Vec<Vec<f64>>,
}

pub fn run(config: &ScenarioConfig, seed: u64) -> Result<RunTrace> {
    run_with_tap(config, seed, |_, _| {})
}

/// Runs every seed of the scenario in parallel, in seed order.
pub fn run_batch(config: &ScenarioConfig) -> Result<Vec<RunTrace>> {
    config.validate()?;
    config.seeds.par_iter().map(|&seed| run(config, seed)).collect()
}

/// Payoffs with every gain at its midpoint, normalized like the rewards.
pub fn normalized_payoffs(config: &ScenarioConfig) -> Result<PayoffTensor> {
    let raw = stationary_payoff_tensor(&config.channel, &config.spaces, UtilityVariant::Full)?;
    let shape = raw.shape().to_vec();
    PayoffTensor::from_fn(shape, |profile| {
        let index = raw.profile_index(profile);
        (0..profile.len())
            .map(|k| config.normalizer.normalize(raw.payoff(index, k)))
            .collect()
    })
}

struct Assignments {
    optimal: Option<Vec<usize>>,
    no_collision: Option<Vec<usize>>,
}

fn assignments(config: &ScenarioConfig, payoffs: Option<&PayoffTensor>) -> Result<Assignments> {
    let mut out = Assignments {
        optimal: None,
        no_collision: None,
    };
    let wants = |kind: &StrategySpec| config.strategies.contains(kind);
    if let Some(t) = payoffs {
        if wants(&StrategySpec::CentralizedOptimal) {
            out.optimal = Some(centralized_optimal(t));
        }
        if wants(&StrategySpec::CentralizedNoCollision) {
            out.no_collision = Some(centralized_no_collision(t, &config.spaces)?);
        }
    }
    Ok(out)
}

/// Zeroes the rewards of a player that shares its channel.
fn punish_collisions(k: usize, profile: &[usize], spaces: &[ActionSpace], observed: &mut f64, diag: &mut Diagnostics) {
    if colliding(profile, spaces)[k] {
        *observed = 0.0;
        diag.expected[k] = 0.0;
    }
    let mut alt = profile.to_vec();
    for (i, value) in diag.counterfactual[k].iter_mut().enumerate() {
        alt[k] = i;
        if colliding(&alt, spaces)[k] {
            *value = 0.0;
        }
    }
}

/// As [`run`], calling `tap(t, diagnostics)` after every trial before the
/// diagnostics are recorded.
pub fn run_with_tap(
    config: &ScenarioConfig,
    seed: u64,
    mut tap: impl FnMut(u64, &mut Diagnostics),
) -> Result<RunTrace> {
    config.validate()?;
    let k_players = config.num_players();
    let model = if config.stationary {
        config.channel.stationary()
    } else {
        config.channel.clone()
    };
    let mut env = Environment::new(model, config.spaces.clone(), config.normalizer, config.noise)?;
    let shape: Vec<usize> = config.spaces.iter().map(ActionSpace::num_actions).collect();

    let needs_payoffs = !config.ce_checkpoints.is_empty() || config.strategies.iter().any(StrategySpec::is_centralized);
    let payoffs = if needs_payoffs {
        Some(normalized_payoffs(config)?)
    } else {
        None
    };
    let assigned = assignments(config, payoffs.as_ref())?;

    let mut policies: Vec<Box<dyn Policy>> = Vec::with_capacity(k_players);
    for (k, spec) in config.strategies.iter().enumerate() {
        let action = match spec {
            StrategySpec::CentralizedOptimal => assigned.optimal.as_ref().map(|p| p[k]),
            StrategySpec::CentralizedNoCollision => assigned.no_collision.as_ref().map(|p| p[k]),
            _ => None,
        };
        policies.push(spec.build(shape[k], config.horizon, action)?);
    }
    let mut rngs: Vec<PlayerRngs> = (0..k_players).map(|k| PlayerRngs::new(seed, k)).collect();
    let mut env_rng = RngStream::new(seed, StreamId::environment());
    let mut ledgers: Vec<RegretLedger> = shape.iter().map(|&n| RegretLedger::new(n)).collect();
    let mut joint = EmpiricalJointDistribution::new(shape.clone())?;
    let mut last_rewards: Vec<Option<f64>> = vec![None; k_players];
    let mut checkpoints = Vec::new();
    let mut ce_rows = Vec::new();
    let mut next_ce = config.ce_checkpoints.iter().copied().peekable();
    let punished: Vec<bool> = config
        .strategies
        .iter()
        .map(|s| *s == StrategySpec::CentralizedNoCollision)
        .collect();

    for t in 1..=config.horizon {
        let mut step = || -> Result<(Vec<usize>, Vec<MixedStrategy>, Vec<f64>)> {
            let mut profile = Vec::with_capacity(k_players);
            let mut strategies = Vec::with_capacity(k_players);
            for k in 0..k_players {
                let d = policies[k].step(last_rewards[k], &mut rngs[k])?;
                profile.push(d.action);
                strategies.push(d.strategy);
            }
            let outcome = env.step(&profile, &mut env_rng)?;
            let mut observed = outcome.observed;
            let mut diag = Diagnostics {
                expected: outcome.expected,
                counterfactual: outcome.counterfactual,
            };
            for k in (0..k_players).filter(|&k| punished[k]) {
                punish_collisions(k, &profile, &config.spaces, &mut observed[k], &mut diag);
            }
            tap(t, &mut diag);
            for k in 0..k_players {
                let estimates = estimate_rewards(profile[k], observed[k], &strategies[k])?;
                ledgers[k].record(&strategies[k], observed[k], &diag.counterfactual[k], &estimates)?;
            }
            joint.update(&profile)?;
            Ok((profile, strategies, observed))
        };
        let (profile, strategies, observed) = step().map_err(|e| e.at_trial(t))?;
        for k in 0..k_players {
            last_rewards[k] = Some(observed[k]);
        }
        if t % config.checkpoint_stride == 0 || t == config.horizon {
            checkpoints.push(CheckpointRow {
                t,
                players: (0..k_players)
                    .map(|k| PlayerRow::new(profile[k], observed[k], &ledgers[k], &strategies[k]))
                    .collect(),
            });
        }
        if next_ce.peek() == Some(&t) {
            next_ce.next();
            let payoffs = payoffs.as_ref().expect("payoffs computed for checkpoints");
            ce_rows.push(CeRow {
                t,
                ce_distance: ce_distance(&joint, payoffs).map_err(|e| e.at_trial(t))?,
                ce_violation: ce_violation(&joint, payoffs).map_err(|e| e.at_trial(t))?,
            });
        }
    }

    let periods = policies
        .iter()
        .map(|p| p.periods().map(<[_]>::to_vec).unwrap_or_default())
        .collect();
    let metadata = metadata(config, seed, &policies, &assigned, &env);
    Ok(RunTrace {
        scenario: config.name.clone(),
        label: config.strategy_label(),
        seed,
        horizon: config.horizon,
        checkpoint_stride: config.checkpoint_stride,
        checkpoints,
        ce: ce_rows,
        periods,
        metadata,
    })
}

/// Order of the trial count needed for an approximate correlated
/// equilibrium, without its unknown constant.
pub fn ce_trial_count_scale(spaces: &[ActionSpace]) -> f64 {
    let k = spaces.len() as f64;
    spaces
        .iter()
        .map(|s| {
            let n = s.num_actions() as f64;
            (n * k) * (n * n * n.ln() + k * k * k.ln())
        })
        .fold(0.0, f64::max)
}

fn metadata(
    config: &ScenarioConfig,
    seed: u64,
    policies: &[Box<dyn Policy>],
    assigned: &Assignments,
    env: &Environment,
) -> BTreeMap<String, Value> {
    let mut m = BTreeMap::new();
    m.insert("schema_version".into(), json!(config.schema_version));
    m.insert("scenario".into(), json!(config.name));
    m.insert("seed".into(), json!(seed));
    m.insert("horizon".into(), json!(config.horizon));
    m.insert("checkpoint_stride".into(), json!(config.checkpoint_stride));
    m.insert("ce_checkpoints".into(), json!(config.ce_checkpoints));
    m.insert("stationary_gains".into(), json!(config.stationary));
    m.insert("noise_half_width".into(), json!(config.noise.half_width));
    m.insert("noise_applied".into(), json!("after normalization, then clipped to [0, 1]"));
    m.insert("normalizer_g_min".into(), json!(config.normalizer.g_min()));
    m.insert("normalizer_g_max".into(), json!(config.normalizer.g_max()));
    m.insert("noise_power".into(), json!(config.channel.noise_variance()));
    m.insert("power_price".into(), json!(config.channel.price()));
    m.insert("gain_draws".into(), json!("uniform within each interval, every trial"));
    m.insert("rng".into(), json!("ChaCha8, one stream per (owner, purpose)"));
    m.insert("fixed_point_tolerance".into(), json!(FIXED_POINT_TOLERANCE));
    m.insert("fixed_point_max_iterations".into(), json!(FIXED_POINT_MAX_ITERATIONS));
    m.insert("fixed_point_start".into(), json!("previous trial's strategy (uniform at t = 1)"));
    m.insert("ce_payoffs".into(), json!("midpoint gains, normalized"));
    let clips = env.clip_counts();
    m.insert("clipped_utilities".into(), json!(clips.utility));
    m.insert("clipped_observations".into(), json!(clips.observation));
    if let Some(p) = &assigned.optimal {
        m.insert("centralized_optimal_profile".into(), json!(p));
    }
    if let Some(p) = &assigned.no_collision {
        m.insert("centralized_no_collision_profile".into(), json!(p));
    }
    let scale = ce_trial_count_scale(&config.spaces);
    m.insert(
        "ce_trial_count".into(),
        json!({
            "scale": scale,
            "bewas_epsilon_exponent": -1.5,
            "bfpls_epsilon_exponent": -2.0,
            "note": "order only, constants unknown",
        }),
    );
    let players: Vec<Value> = policies
        .iter()
        .zip(&config.spaces)
        .map(|(p, s)| {
            json!({
                "kind": p.kind(),
                "num_actions": s.num_actions(),
                "actions": (0..s.num_actions()).map(|a| s.label(a)).collect::<Vec<_>>(),
                "parameters": p.parameters(),
            })
        })
        .collect();
    m.insert("players".into(), json!(players));
    m
}
