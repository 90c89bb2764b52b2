use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::{require_reward, Decision, PlayerRngs, Policy};
use crate::common::{sample_from, ActionSpace, MixedStrategy};
use crate::equilibrium::{argmax_profiles, PayoffTensor};
use crate::error::{Error, Result};

/// Running reward means with optimistic treatment of unseen actions.
#[derive(Debug, Clone)]
struct Means {
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl Means {
    fn new(n: usize) -> Self {
        Means {
            sums: vec![0.0; n],
            counts: vec![0; n],
        }
    }

    fn record(&mut self, action: usize, reward: f64) {
        self.sums[action] += reward;
        self.counts[action] += 1;
    }

    fn unseen(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c == 0)
    }

    /// Lowest unseen action, else the best empirical mean (lowest index on ties).
    fn best(&self) -> usize {
        self.unseen().unwrap_or_else(|| {
            let mut best = 0;
            for a in 1..self.sums.len() {
                if self.mean(a) > self.mean(best) {
                    best = a;
                }
            }
            best
        })
    }

    fn mean(&self, a: usize) -> f64 {
        self.sums[a] / self.counts[a] as f64
    }
}

#[derive(Debug, Clone)]
pub struct UniformRandom {
    strategy: MixedStrategy,
}

impl UniformRandom {
    pub fn new(n: usize) -> Self {
        UniformRandom {
            strategy: MixedStrategy::uniform(n),
        }
    }
}

impl Policy for UniformRandom {
    fn step(&mut self, _last_reward: Option<f64>, rngs: &mut PlayerRngs) -> Result<Decision> {
        Ok(Decision {
            action: sample_from(&self.strategy, &mut rngs.sampling),
            strategy: self.strategy.clone(),
        })
    }

    fn kind(&self) -> &'static str {
        "uniform"
    }

    fn parameters(&self) -> BTreeMap<String, Value> {
        BTreeMap::from([("num_actions".into(), json!(self.strategy.len()))])
    }
}

/// Explores uniformly with probability `epsilon`, otherwise plays the best
/// empirical mean.
#[derive(Debug, Clone)]
pub struct EpsGreedy {
    epsilon: f64,
    means: Means,
    last_action: Option<usize>,
}

impl EpsGreedy {
    pub fn new(n: usize, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::config(format!("epsilon {epsilon} outside [0, 1]")));
        }
        Ok(EpsGreedy {
            epsilon,
            means: Means::new(n),
            last_action: None,
        })
    }
}

impl Policy for EpsGreedy {
    fn step(&mut self, last_reward: Option<f64>, rngs: &mut PlayerRngs) -> Result<Decision> {
        if let (Some(r), Some(a)) = (require_reward(last_reward, self.last_action.is_some())?, self.last_action) {
            self.means.record(a, r);
        }
        let n = self.means.sums.len();
        let best = self.means.best();
        let mut probs = vec![self.epsilon / n as f64; n];
        probs[best] += 1.0 - self.epsilon;
        let strategy = crate::common::project_to_simplex(&probs)?;
        let action = sample_from(&strategy, &mut rngs.sampling);
        self.last_action = Some(action);
        Ok(Decision { action, strategy })
    }

    fn kind(&self) -> &'static str {
        "eps_greedy"
    }

    fn parameters(&self) -> BTreeMap<String, Value> {
        BTreeMap::from([
            ("epsilon".into(), json!(self.epsilon)),
            ("unseen_actions".into(), json!("tried first, lowest index")),
            ("ties".into(), json!("lowest index")),
        ])
    }
}

/// Uniform exploration for a fixed share of the horizon, then commits to
/// the best empirical mean. Actions never seen while exploring are tried
/// once before committing.
#[derive(Debug, Clone)]
pub struct Greedy {
    explore_fraction: f64,
    explore_trials: u64,
    t: u64,
    means: Means,
    locked: Option<usize>,
    last_action: Option<usize>,
}

impl Greedy {
    pub fn new(n: usize, explore_fraction: f64, horizon: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&explore_fraction) {
            return Err(Error::config(format!("exploration fraction {explore_fraction} outside [0, 1]")));
        }
        Ok(Greedy {
            explore_fraction,
            explore_trials: (explore_fraction * horizon as f64).ceil() as u64,
            t: 0,
            means: Means::new(n),
            locked: None,
            last_action: None,
        })
    }
}

impl Policy for Greedy {
    fn step(&mut self, last_reward: Option<f64>, rngs: &mut PlayerRngs) -> Result<Decision> {
        if let (Some(r), Some(a)) = (require_reward(last_reward, self.last_action.is_some())?, self.last_action) {
            self.means.record(a, r);
        }
        self.t += 1;
        let n = self.means.sums.len();
        let decision = if self.t <= self.explore_trials {
            let strategy = MixedStrategy::uniform(n);
            Decision {
                action: sample_from(&strategy, &mut rngs.sampling),
                strategy,
            }
        } else {
            let action = match (self.locked, self.means.unseen()) {
                (Some(a), _) => a,
                (None, Some(a)) => a,
                (None, None) => *self.locked.insert(self.means.best()),
            };
            Decision {
                action,
                strategy: MixedStrategy::point_mass(n, action),
            }
        };
        self.last_action = Some(decision.action);
        Ok(decision)
    }

    fn kind(&self) -> &'static str {
        "greedy"
    }

    fn parameters(&self) -> BTreeMap<String, Value> {
        BTreeMap::from([
            ("explore_fraction".into(), json!(self.explore_fraction)),
            ("explore_trials".into(), json!(self.explore_trials)),
        ])
    }
}

/// Plays one centrally assigned action forever.
#[derive(Debug, Clone)]
pub struct FixedAction {
    label: &'static str,
    strategy: MixedStrategy,
    action: usize,
}

impl FixedAction {
    pub fn new(label: &'static str, n: usize, action: usize) -> Result<Self> {
        if action >= n {
            return Err(Error::config(format!("assigned action {action} out of range")));
        }
        Ok(FixedAction {
            label,
            strategy: MixedStrategy::point_mass(n, action),
            action,
        })
    }
}

impl Policy for FixedAction {
    fn step(&mut self, _last_reward: Option<f64>, _rngs: &mut PlayerRngs) -> Result<Decision> {
        Ok(Decision {
            action: self.action,
            strategy: self.strategy.clone(),
        })
    }

    fn kind(&self) -> &'static str {
        self.label
    }

    fn parameters(&self) -> BTreeMap<String, Value> {
        BTreeMap::from([("assigned_action".into(), json!(self.action))])
    }
}

/// Joint profile maximizing the summed payoff (first in index order on ties).
pub fn centralized_optimal(payoffs: &PayoffTensor) -> Vec<usize> {
    let k = payoffs.num_players();
    argmax_profiles(payoffs, |i| (0..k).map(|q| payoffs.payoff(i, q)).sum())
        .swap_remove(0)
}

/// Players sharing a channel in `profile`.
pub fn colliding(profile: &[usize], spaces: &[ActionSpace]) -> Vec<bool> {
    let channels: Vec<usize> = profile
        .iter()
        .zip(spaces)
        .map(|(&a, s)| a / s.num_levels())
        .collect();
    (0..profile.len())
        .map(|k| (0..profile.len()).any(|q| q != k && channels[q] == channels[k]))
        .collect()
}

/// Joint profile maximizing the summed payoff when players that share a
/// channel earn nothing.
pub fn centralized_no_collision(payoffs: &PayoffTensor, spaces: &[ActionSpace]) -> Result<Vec<usize>> {
    if spaces.len() != payoffs.num_players() {
        return Err(Error::domain("one action space per player needed"));
    }
    let k = payoffs.num_players();
    Ok(argmax_profiles(payoffs, |i| {
        let profile = payoffs.profile_of(i);
        let hit = colliding(&profile, spaces);
        (0..k).filter(|&q| !hit[q]).map(|q| payoffs.payoff(i, q)).sum()
    })
    .swap_remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_epsilon_zero_exploits_after_trying_each_arm() {
        let mut p = EpsGreedy::new(3, 0.0).unwrap();
        let mut r = PlayerRngs::new(0, 0);
        let rewards = [0.2, 0.7, 0.4];
        let mut last = None;
        let mut played = Vec::new();
        for _ in 0..10 {
            let d = p.step(last, &mut r).unwrap();
            played.push(d.action);
            last = Some(rewards[d.action]);
        }
        assert_eq!(&played[..3], &[0, 1, 2]);
        assert!(played[3..].iter().all(|&a| a == 1));
    }

    #[test]
    fn eps_greedy_strategy_mixes() {
        let mut p = EpsGreedy::new(4, 0.1).unwrap();
        let d = p.step(None, &mut PlayerRngs::new(0, 0)).unwrap();
        assert_eq!(d.strategy.probs(), &[0.925, 0.025, 0.025, 0.025]);
    }

    #[test]
    fn greedy_locks_after_exploring() {
        let mut p = Greedy::new(2, 0.1, 1000).unwrap();
        let mut r = PlayerRngs::new(1, 0);
        let mut last = None;
        let mut played = Vec::new();
        for _ in 0..1000 {
            let d = p.step(last, &mut r).unwrap();
            played.push(d.action);
            last = Some([0.3, 0.6][d.action]);
        }
        assert!(played[100..].iter().all(|&a| a == 1));
    }

    #[test]
    fn centralized_profiles() {
        let spaces = vec![ActionSpace::new(2, vec![1.0]).unwrap(); 2];
        // both prefer channel 0, sharing it is worse than splitting
        let t = PayoffTensor::from_fn(vec![2, 2], |p| {
            if p[0] == p[1] { vec![0.6, 0.6] } else { vec![[0.9, 0.5][p[0]], [0.9, 0.5][p[1]]] }
        })
        .unwrap();
        assert_eq!(centralized_optimal(&t), vec![0, 1]);
        assert_eq!(centralized_no_collision(&t, &spaces).unwrap(), vec![0, 1]);
        assert_eq!(colliding(&[1, 1], &spaces), vec![true, true]);
    }

    #[test]
    fn no_collision_search_matches_exhaustive_scoring() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let spaces = vec![ActionSpace::new(3, vec![1.0, 2.0]).unwrap(); 5];
        let t = PayoffTensor::from_fn(vec![6; 5], |_| (0..5).map(|_| rng.random::<f64>()).collect()).unwrap();
        let got = centralized_no_collision(&t, &spaces).unwrap();
        let score = |p: &[usize]| {
            let hit = colliding(p, &spaces);
            let i = t.profile_index(p);
            (0..5).filter(|&q| !hit[q]).map(|q| t.payoff(i, q)).sum::<f64>()
        };
        let best = (0..t.num_profiles())
            .map(|i| score(&t.profile_of(i)))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((score(&got) - best).abs() < 1e-12);
        // five users on three channels always collide somewhere
        assert!(colliding(&got, &spaces).iter().any(|&c| c));
    }
}
