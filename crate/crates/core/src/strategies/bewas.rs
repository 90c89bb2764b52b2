use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{require_reward, Decision, PlayerRngs, Policy};
use crate::common::{sample_from, MixedStrategy};
use crate::error::{Error, Result};
use crate::regret::{estimate_rewards, SwapRegretTable};
use crate::swap::{mix_uniform, pair_index, solve_fixed_point_from, PairDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BewasSchedule {
    /// Constant rates tuned to a horizon fixed in advance.
    Known,
    /// `gamma_t = t^(-1/3)`, `eta_t = gamma_t^3 / N^2`.
    Unknown,
}

/// Constant learning and exploration rates for horizon `n`, each clamped
/// into (0, 1]. The flag reports whether clamping changed either value.
pub fn known_horizon_rates(num_actions: usize, horizon: u64) -> (f64, f64, bool) {
    let n_act = num_actions as f64;
    let n = horizon as f64;
    let ln = n_act.ln();
    let eta = (ln / (2.0 * n_act * n)).powf(2.0 / 3.0);
    let gamma = (n_act * n_act * ln / (4.0 * n)).powf(1.0 / 3.0);
    (eta.min(1.0), gamma.min(1.0), eta > 1.0 || gamma > 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BewasConfig {
    num_actions: usize,
    schedule: BewasSchedule,
    horizon: Option<u64>,
    known_rates: (f64, f64),
    clamped: bool,
}

impl BewasConfig {
    pub fn known(num_actions: usize, horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::config("known-horizon schedule needs a positive horizon"));
        }
        let (eta, gamma, clamped) = known_horizon_rates(num_actions, horizon);
        Ok(BewasConfig {
            num_actions,
            schedule: BewasSchedule::Known,
            horizon: Some(horizon),
            known_rates: (eta, gamma),
            clamped,
        })
    }

    pub fn unknown(num_actions: usize) -> Self {
        BewasConfig {
            num_actions,
            schedule: BewasSchedule::Unknown,
            horizon: None,
            known_rates: (f64::NAN, f64::NAN),
            clamped: false,
        }
    }

    pub fn schedule(&self) -> BewasSchedule {
        self.schedule
    }

    /// `(eta_t, gamma_t)` used to form the strategy of trial `t` (1-based).
    pub fn rates(&self, t: u64) -> (f64, f64) {
        match self.schedule {
            BewasSchedule::Known => self.known_rates,
            BewasSchedule::Unknown => {
                let gamma = (t as f64).powf(-1.0 / 3.0);
                let n = self.num_actions as f64;
                (gamma.powi(3) / (n * n), gamma)
            }
        }
    }
}

/// Exponential weights over the pairwise regrets, computed relative to the
/// largest entry so that large `eta * R` cannot overflow.
pub fn exponential_pair_weights(table: &SwapRegretTable, eta: f64) -> Result<PairDistribution> {
    let n = table.num_actions();
    let mut scores = vec![0.0; n * (n - 1)];
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            scores[pair_index(n, i, j)] = eta * table.get(i, j);
        }
    }
    softmax_pairs(n, scores)
}

fn softmax_pairs(n: usize, scores: Vec<f64>) -> Result<PairDistribution> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::domain("non-finite pairwise regret score"));
    }
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    PairDistribution::from_weights(n, scores.into_iter().map(|s| (s - top).exp()).collect())
}

/// Exponentially weighted swap-regret player with bandit estimates.
#[derive(Debug, Clone)]
pub struct Bewas {
    cfg: BewasConfig,
    table: SwapRegretTable,
    t: u64,
    strategy: MixedStrategy,
    last_action: usize,
}

impl Bewas {
    pub fn new(cfg: BewasConfig) -> Self {
        let n = cfg.num_actions;
        Bewas {
            table: SwapRegretTable::new(n),
            t: 0,
            strategy: MixedStrategy::uniform(n),
            last_action: 0,
            cfg,
        }
    }

    pub fn regret_table(&self) -> &SwapRegretTable {
        &self.table
    }
}

impl Policy for Bewas {
    fn step(&mut self, last_reward: Option<f64>, rngs: &mut PlayerRngs) -> Result<Decision> {
        if let Some(r) = require_reward(last_reward, self.t > 0)? {
            let g = estimate_rewards(self.last_action, r, &self.strategy)?;
            self.table.accumulate(&self.strategy, &g)?;
        }
        self.t += 1;
        if self.t > 1 && self.cfg.num_actions > 1 {
            let (eta, gamma) = self.cfg.rates(self.t);
            let delta = exponential_pair_weights(&self.table, eta)?;
            // Warm start from the previous strategy, from which the swapped
            // strategies are built.
            let p = solve_fixed_point_from(&delta, &self.strategy)?;
            self.strategy = mix_uniform(&p, gamma)?;
        }
        self.last_action = sample_from(&self.strategy, &mut rngs.sampling);
        Ok(Decision {
            action: self.last_action,
            strategy: self.strategy.clone(),
        })
    }

    fn kind(&self) -> &'static str {
        "bewas"
    }

    fn parameters(&self) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        m.insert("schedule".into(), json!(self.cfg.schedule));
        m.insert("num_actions".into(), json!(self.cfg.num_actions));
        match self.cfg.schedule {
            BewasSchedule::Known => {
                m.insert("horizon".into(), json!(self.cfg.horizon));
                m.insert("eta".into(), json!(self.cfg.known_rates.0));
                m.insert("gamma".into(), json!(self.cfg.known_rates.1));
                m.insert("rates_clamped".into(), json!(self.cfg.clamped));
            }
            BewasSchedule::Unknown => {
                m.insert("gamma_t".into(), json!("t^(-1/3)"));
                m.insert("eta_t".into(), json!("gamma_t^3 / N^2"));
            }
        }
        m.insert("fixed_point_start".into(), json!("previous strategy"));
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rngs() -> PlayerRngs {
        PlayerRngs::new(1, 0)
    }

    #[test]
    fn first_strategy_is_uniform() {
        for cfg in [BewasConfig::unknown(4), BewasConfig::known(4, 1000).unwrap()] {
            let mut b = Bewas::new(cfg);
            let d = b.step(None, &mut rngs()).unwrap();
            assert_eq!(d.strategy, MixedStrategy::uniform(4));
        }
    }

    #[test]
    fn later_steps_need_a_reward() {
        let mut b = Bewas::new(BewasConfig::unknown(3));
        let mut r = rngs();
        b.step(None, &mut r).unwrap();
        assert!(b.step(None, &mut r).is_err());
    }

    #[test]
    fn equal_regrets_give_uniform_play() {
        let table = SwapRegretTable::new(3);
        let d = exponential_pair_weights(&table, 0.7).unwrap();
        assert!(d.values().iter().all(|&x| (x - 1.0 / 6.0).abs() < 1e-15));
        let p = crate::swap::solve_fixed_point(&d).unwrap();
        let q = mix_uniform(&p, 0.3).unwrap();
        assert!(q.l1_distance(&MixedStrategy::uniform(3)) < 1e-9);
    }

    #[test]
    fn known_rates_match_formulas() {
        let (eta, gamma, clamped) = known_horizon_rates(4, 100_000);
        let ln4 = 4f64.ln();
        assert!((eta - (ln4 / 800_000.0).powf(2.0 / 3.0)).abs() < 1e-15);
        assert!((gamma - (16.0 * ln4 / 400_000.0).powf(1.0 / 3.0)).abs() < 1e-15);
        assert!(!clamped);
        let (_, gamma, clamped) = known_horizon_rates(4, 2);
        assert_eq!(gamma, 1.0);
        assert!(clamped);
    }

    #[test]
    fn unknown_rates_follow_time() {
        let cfg = BewasConfig::unknown(4);
        let (eta, gamma) = cfg.rates(8);
        assert!((gamma - 0.5).abs() < 1e-15);
        assert!((eta - 0.125 / 16.0).abs() < 1e-15);
    }

    fn run_constant_toy(cfg: BewasConfig, steps: usize) -> (MixedStrategy, f64) {
        let rewards = [1.0, 0.0];
        let mut b = Bewas::new(cfg.clone());
        let mut r = rngs();
        let mut last = None;
        let mut d = None;
        for _ in 0..steps {
            let dec = b.step(last, &mut r).unwrap();
            last = Some(rewards[dec.action]);
            d = Some(dec);
        }
        (d.unwrap().strategy, cfg.rates(steps as u64).1)
    }

    #[test]
    fn concentrates_on_dominant_action() {
        let n = 10_000;
        let (p, gamma) = run_constant_toy(BewasConfig::known(2, n as u64).unwrap(), n);
        assert!(p.prob(0) >= 1.0 - gamma - 0.05, "{p:?}, gamma {gamma}");
    }

    #[test]
    fn exploration_floor_holds() {
        let mut b = Bewas::new(BewasConfig::unknown(4));
        let mut r = rngs();
        let mut last = None;
        for t in 1..=2000u64 {
            let d = b.step(last, &mut r).unwrap();
            let gamma = (t as f64).powf(-1.0 / 3.0);
            assert!(d.strategy.min_prob() >= gamma / 4.0 - 1e-12);
            last = Some([0.9, 0.1, 0.5, 0.3][d.action]);
        }
    }

    proptest! {
        #[test]
        fn weights_ignore_common_shifts(
            scores in prop::collection::vec(-500.0f64..500.0, 6),
            shift in -1e3f64..1e3,
        ) {
            let a = softmax_pairs(3, scores.clone()).unwrap();
            let b = softmax_pairs(3, scores.iter().map(|x| x + shift).collect()).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
