use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{require_reward, Decision, PlayerRngs, Policy};
use crate::common::{project_to_simplex, sample_from, MixedStrategy, RngStream};
use crate::error::{Error, Result};

pub const DEFAULT_RESET_PROBABILITY: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BertsConfig {
    pub num_actions: usize,
    /// Trials per period, `T`.
    pub period: usize,
    /// Acceptable experimental regret, `rho`.
    pub threshold: f64,
    /// Chance of dropping an accepted strategy anyway, `xi`.
    pub reset_probability: f64,
    /// Forced trials per action in each period, `s`.
    pub exploration_trials: usize,
}

impl BertsConfig {
    pub fn new(
        num_actions: usize,
        period: usize,
        threshold: f64,
        reset_probability: Option<f64>,
        exploration_trials: Option<usize>,
    ) -> Result<Self> {
        let s = exploration_trials.unwrap_or_else(|| (period / (4 * num_actions)).max(1));
        let xi = reset_probability.unwrap_or(DEFAULT_RESET_PROBABILITY);
        if s == 0 {
            return Err(Error::config("regret testing needs at least one forced trial per action"));
        }
        // the free-trial mean divides by T - sN
        if s * num_actions >= period {
            return Err(Error::config(format!(
                "period {period} leaves no free trials after {s} forced trials for each of {num_actions} actions"
            )));
        }
        if !(xi > 0.0 && xi < 1.0) {
            return Err(Error::config(format!("reset probability {xi} outside (0, 1)")));
        }
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::config(format!("regret threshold {threshold} must be positive")));
        }
        Ok(BertsConfig {
            num_actions,
            period,
            threshold,
            reset_probability: xi,
            exploration_trials: s,
        })
    }

    fn free_trials(&self) -> usize {
        self.period - self.exploration_trials * self.num_actions
    }
}

/// Outcome of one completed testing period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    /// 1-based period index.
    pub period: usize,
    pub strategy: Vec<f64>,
    /// Mean forced-trial reward of each action minus the mean free-trial reward.
    pub regrets: Vec<f64>,
    pub max_regret: f64,
    /// Experimental regret within the threshold.
    pub accepted: bool,
    /// Strategy carried into the next period.
    pub kept: bool,
}

/// Uniform draw from the probability simplex via normalized exponentials.
pub fn uniform_simplex(n: usize, rng: &mut RngStream) -> MixedStrategy {
    let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = w.iter().sum();
    project_to_simplex(&w.iter().map(|x| x / total).collect::<Vec<_>>())
        .expect("exponential draws are positive")
}

/// Bandit experimental regret testing.
#[derive(Debug, Clone)]
pub struct Berts {
    cfg: BertsConfig,
    strategy: MixedStrategy,
    /// Per position in the period: 0 for a free trial, `a + 1` for a trial
    /// forced onto action `a`.
    schedule: Vec<usize>,
    position: usize,
    free_sum: f64,
    forced_sums: Vec<f64>,
    records: Vec<PeriodRecord>,
    started: bool,
    initial: Option<MixedStrategy>,
}

impl Berts {
    pub fn new(cfg: BertsConfig) -> Self {
        let n = cfg.num_actions;
        Berts {
            strategy: MixedStrategy::uniform(n),
            schedule: Vec::new(),
            position: 0,
            free_sum: 0.0,
            forced_sums: vec![0.0; n],
            records: Vec::new(),
            started: false,
            initial: None,
            cfg,
        }
    }

    /// Starts from `strategy` instead of a uniform draw from the simplex.
    pub fn starting_from(cfg: BertsConfig, strategy: MixedStrategy) -> Result<Self> {
        if strategy.len() != cfg.num_actions {
            return Err(Error::config("initial strategy has the wrong dimension"));
        }
        let mut b = Berts::new(cfg);
        b.initial = Some(strategy);
        Ok(b)
    }

    pub fn config(&self) -> &BertsConfig {
        &self.cfg
    }

    pub fn strategy(&self) -> &MixedStrategy {
        &self.strategy
    }

    fn new_schedule(&mut self, rng: &mut RngStream) {
        let (s, n) = (self.cfg.exploration_trials, self.cfg.num_actions);
        let mut slots: Vec<usize> = (0..self.cfg.period)
            .map(|p| if p < s * n { p / s + 1 } else { 0 })
            .collect();
        slots.shuffle(rng);
        self.schedule = slots;
        self.position = 0;
        self.free_sum = 0.0;
        self.forced_sums.iter_mut().for_each(|x| *x = 0.0);
    }

    fn close_period(&mut self, rng: &mut RngStream) {
        let free_mean = self.free_sum / self.cfg.free_trials() as f64;
        let s = self.cfg.exploration_trials as f64;
        let regrets: Vec<f64> = self.forced_sums.iter().map(|f| f / s - free_mean).collect();
        let max_regret = regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let accepted = max_regret <= self.cfg.threshold;
        let kept = accepted && rng.random::<f64>() >= self.cfg.reset_probability;
        self.records.push(PeriodRecord {
            period: self.records.len() + 1,
            strategy: self.strategy.probs().to_vec(),
            regrets,
            max_regret,
            accepted,
            kept,
        });
        if !kept {
            self.strategy = uniform_simplex(self.cfg.num_actions, rng);
        }
    }
}

impl Policy for Berts {
    fn step(&mut self, last_reward: Option<f64>, rngs: &mut PlayerRngs) -> Result<Decision> {
        if let Some(r) = require_reward(last_reward, self.started)? {
            match self.schedule[self.position - 1] {
                0 => self.free_sum += r,
                slot => self.forced_sums[slot - 1] += r,
            }
        }
        if !self.started {
            self.started = true;
            self.strategy = match self.initial.take() {
                Some(p) => p,
                None => uniform_simplex(self.cfg.num_actions, &mut rngs.reset),
            };
            self.new_schedule(&mut rngs.reset);
        } else if self.position == self.cfg.period {
            self.close_period(&mut rngs.reset);
            self.new_schedule(&mut rngs.reset);
        }
        let slot = self.schedule[self.position];
        self.position += 1;
        Ok(match slot {
            0 => Decision {
                action: sample_from(&self.strategy, &mut rngs.sampling),
                strategy: self.strategy.clone(),
            },
            forced => Decision {
                action: forced - 1,
                strategy: MixedStrategy::point_mass(self.cfg.num_actions, forced - 1),
            },
        })
    }

    fn kind(&self) -> &'static str {
        "berts"
    }

    fn parameters(&self) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        m.insert("num_actions".into(), json!(self.cfg.num_actions));
        m.insert("period".into(), json!(self.cfg.period));
        m.insert("threshold".into(), json!(self.cfg.threshold));
        m.insert("reset_probability".into(), json!(self.cfg.reset_probability));
        m.insert("exploration_trials".into(), json!(self.cfg.exploration_trials));
        m.insert("experimental_regret".into(), json!("forced mean - free mean"));
        m.insert("strategy_draw".into(), json!("uniform on simplex (normalized exponentials)"));
        m
    }

    fn periods(&self) -> Option<&[PeriodRecord]> {
        Some(&self.records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::common::{Purpose, StreamId};

    fn drive(b: &mut Berts, rewards: impl Fn(usize) -> f64, steps: usize, seed: u64) -> Vec<Decision> {
        let mut r = PlayerRngs::new(seed, 0);
        let mut last = None;
        (0..steps)
            .map(|_| {
                let d = b.step(last, &mut r).unwrap();
                last = Some(rewards(d.action));
                d
            })
            .collect()
    }

    #[test]
    fn config_defaults_and_limits() {
        let c = BertsConfig::new(4, 80, 0.16, None, None).unwrap();
        assert_eq!(c.exploration_trials, 5);
        assert_eq!(c.reset_probability, 0.01);
        assert!(BertsConfig::new(4, 8, 0.16, None, Some(2)).is_err());
        assert!(BertsConfig::new(4, 80, 0.16, Some(1.0), None).is_err());
        assert!(BertsConfig::new(4, 80, 0.0, None, None).is_err());
        assert!(BertsConfig::new(4, 80, 0.16, None, Some(0)).is_err());
    }

    #[test]
    fn each_period_forces_every_action_s_times() {
        let cfg = BertsConfig::new(3, 30, 0.1, None, Some(4)).unwrap();
        let mut b = Berts::new(cfg);
        let decisions = drive(&mut b, |_| 0.5, 90, 1);
        for period in decisions.chunks(30) {
            for a in 0..3 {
                let forced = period
                    .iter()
                    .filter(|d| d.action == a && d.strategy == MixedStrategy::point_mass(3, a))
                    .count();
                assert!(forced >= 4);
            }
        }
    }

    #[test]
    fn indifferent_rewards_are_accepted() {
        let cfg = BertsConfig::new(4, 80, 0.16, None, None).unwrap();
        let mut b = Berts::new(cfg);
        drive(&mut b, |_| 0.4, 80 * 50 + 1, 2);
        let recs = b.periods().unwrap();
        assert_eq!(recs.len(), 50);
        assert!(recs.iter().all(|r| r.accepted && r.max_regret.abs() < 1e-12));
        // only the reset coin changes the strategy
        let resets = recs.iter().filter(|r| !r.kept).count();
        assert!(resets <= 5);
    }

    #[test]
    fn best_point_mass_has_no_positive_regret() {
        let cfg = BertsConfig::new(3, 60, 0.05, None, None).unwrap();
        let mut b = Berts::starting_from(cfg, MixedStrategy::point_mass(3, 1)).unwrap();
        let rewards = [0.2, 0.9, 0.5];
        let mut r = PlayerRngs::new(3, 0);
        let mut last = None;
        for _ in 0..=60 {
            let d = b.step(last, &mut r).unwrap();
            last = Some(rewards[d.action]);
        }
        let rec = &b.periods().unwrap()[0];
        assert!(rec.regrets.iter().all(|&x| x <= 1e-12), "{rec:?}");
        assert!(rec.accepted);
    }

    #[test]
    fn kept_strategies_persist_and_rejections_redraw() {
        let cfg = BertsConfig::new(4, 80, 0.05, None, None).unwrap();
        let mut b = Berts::new(cfg);
        let decisions = drive(&mut b, |a| [0.1, 0.8, 0.3, 0.2][a], 80 * 200 + 1, 7);
        let recs = b.periods().unwrap();
        for w in recs.windows(2) {
            if w[0].kept {
                assert_eq!(w[0].strategy, w[1].strategy);
            } else {
                assert_ne!(w[0].strategy, w[1].strategy);
            }
            assert_eq!(w[0].accepted, w[0].max_regret <= 0.05);
        }
        // free trials within one period share one strategy
        for (m, period) in decisions.chunks(80).take(200).enumerate() {
            for d in period.iter().filter(|d| d.strategy.min_prob() > 0.0) {
                assert_eq!(d.strategy.probs(), &recs[m].strategy[..]);
            }
        }
    }

    #[test]
    fn simplex_draws_are_uniform() {
        // under the uniform law on the 3-simplex each coordinate is Beta(1, 2)
        let mut rng = RngStream::new(9, StreamId::player(0, Purpose::StrategyReset));
        let n = 200_000;
        let mut below = 0;
        let mut mean = 0.0;
        for _ in 0..n {
            let p = uniform_simplex(3, &mut rng);
            mean += p.prob(0);
            if p.prob(0) < 0.5 {
                below += 1;
            }
        }
        assert!((mean / n as f64 - 1.0 / 3.0).abs() < 3e-3);
        // P(X < 0.5) = 1 - 0.5^2
        assert!((below as f64 / n as f64 - 0.75).abs() < 5e-3);
    }
}
