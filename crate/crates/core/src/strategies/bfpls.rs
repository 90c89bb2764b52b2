use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::laplace::{argmax_frequencies, argmax_probabilities};
use super::{require_reward, Decision, PlayerRngs, Policy};
use serde::{Deserialize, Serialize};

use crate::common::{sample_from, MixedStrategy};
use crate::error::{Error, Result};
use crate::regret::{estimate_rewards, SwapRegretTable};
use crate::swap::{mix_uniform, pair_index, solve_fixed_point_from, PairDistribution};

/// Direction of the confidence shift applied to the estimated regrets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceShift {
    /// `R - c sigma sqrt(ln t)`, as the algorithm is written.
    #[default]
    Pessimistic,
    /// `R + c sigma sqrt(ln t)`: uncertain pairs get a bonus instead.
    Optimistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfplsConfig {
    pub num_actions: usize,
    pub horizon: u64,
    /// Rate of the two-sided exponential perturbation, whose density is
    /// `(epsilon / 2) exp(-epsilon |x|)`.
    pub epsilon: f64,
    pub gamma: f64,
    /// Multiplier of the confidence shift, `sqrt(1 + sqrt(2 / N))`.
    pub shift_coeff: f64,
    pub shift: ConfidenceShift,
    /// Sample the pair probabilities instead of integrating them.
    pub monte_carlo_samples: Option<usize>,
}

impl BfplsConfig {
    pub fn new(num_actions: usize, horizon: u64) -> Result<Self> {
        if horizon < 2 {
            return Err(Error::config(
                "perturbed-leader width vanishes for horizons below 2 (ln n = 0)",
            ));
        }
        let n_act = num_actions as f64;
        let n = horizon as f64;
        let epsilon = n.ln().sqrt() / (3.0 * (n_act * n).sqrt());
        Ok(BfplsConfig {
            num_actions,
            horizon,
            epsilon,
            gamma: (n_act * epsilon).min(1.0),
            shift_coeff: (1.0 + (2.0 / n_act).sqrt()).sqrt(),
            shift: ConfidenceShift::Pessimistic,
            monte_carlo_samples: None,
        })
    }

    /// Laplace scale of the perturbation, `1 / epsilon`.
    pub fn perturbation_scale(&self) -> f64 {
        1.0 / self.epsilon
    }
}

/// Follow-the-perturbed-leader swap-regret player with bandit estimates.
#[derive(Debug, Clone)]
pub struct Bfpls {
    cfg: BfplsConfig,
    /// Raw estimated pairwise regrets; the confidence shift is applied when
    /// the table is read.
    table: SwapRegretTable,
    /// Running `sum_tau 1 / delta_tau` per pair, seeded with one uniform step.
    inverse_sums: Vec<f64>,
    t: u64,
    strategy: MixedStrategy,
    last_action: usize,
}

impl Bfpls {
    pub fn new(cfg: BfplsConfig) -> Self {
        let n = cfg.num_actions;
        let pairs = n * n.saturating_sub(1);
        Bfpls {
            table: SwapRegretTable::new(n),
            inverse_sums: vec![pairs as f64; pairs],
            t: 0,
            strategy: MixedStrategy::uniform(n),
            last_action: 0,
            cfg,
        }
    }

    pub fn regret_table(&self) -> &SwapRegretTable {
        &self.table
    }

    pub fn inverse_sums(&self) -> &[f64] {
        &self.inverse_sums
    }

    /// Regrets moved by `c sigma sqrt(ln t)`, in pair order.
    pub fn shifted_regrets(&self, t: u64) -> Vec<f64> {
        let n = self.cfg.num_actions;
        let scale = self.cfg.shift_coeff * (t as f64).ln().sqrt();
        let sign = match self.cfg.shift {
            ConfidenceShift::Pessimistic => -1.0,
            ConfidenceShift::Optimistic => 1.0,
        };
        let mut out = vec![0.0; self.inverse_sums.len()];
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let k = pair_index(n, i, j);
                out[k] = self.table.get(i, j) + sign * scale * self.inverse_sums[k].sqrt();
            }
        }
        out
    }

    fn pair_distribution(&self, shifted: &[f64], rngs: &mut PlayerRngs) -> Result<PairDistribution> {
        let b = self.cfg.perturbation_scale();
        let probs = match self.cfg.monte_carlo_samples {
            None => argmax_probabilities(shifted, b)?,
            Some(samples) => argmax_frequencies(shifted, b, samples, &mut rngs.perturbation)?,
        };
        PairDistribution::from_weights(self.cfg.num_actions, probs)
    }
}

impl Policy for Bfpls {
    fn step(&mut self, last_reward: Option<f64>, rngs: &mut PlayerRngs) -> Result<Decision> {
        if let Some(r) = require_reward(last_reward, self.t > 0)? {
            let g = estimate_rewards(self.last_action, r, &self.strategy)?;
            self.table.accumulate(&self.strategy, &g)?;
        }
        self.t += 1;
        if self.t > 1 && self.cfg.num_actions > 1 {
            let shifted = self.shifted_regrets(self.t);
            let delta = self.pair_distribution(&shifted, rngs)?;
            let p = solve_fixed_point_from(&delta, &self.strategy)?;
            self.strategy = mix_uniform(&p, self.cfg.gamma)?;
            // Pair probabilities get the same exploration floor as actions,
            // so a pair the leader never picks still has a finite variance
            // bound.
            let pairs = self.inverse_sums.len() as f64;
            let g = self.cfg.gamma;
            for (sum, d) in self.inverse_sums.iter_mut().zip(delta.values()) {
                *sum += 1.0 / ((1.0 - g) * d + g / pairs);
            }
        }
        self.last_action = sample_from(&self.strategy, &mut rngs.sampling);
        Ok(Decision {
            action: self.last_action,
            strategy: self.strategy.clone(),
        })
    }

    fn kind(&self) -> &'static str {
        "bfpls"
    }

    fn parameters(&self) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        m.insert("num_actions".into(), json!(self.cfg.num_actions));
        m.insert("horizon".into(), json!(self.cfg.horizon));
        m.insert("epsilon".into(), json!(self.cfg.epsilon));
        m.insert("perturbation_scale".into(), json!(self.cfg.perturbation_scale()));
        m.insert("gamma".into(), json!(self.cfg.gamma));
        m.insert("shift_coeff".into(), json!(self.cfg.shift_coeff));
        m.insert("shift".into(), json!(self.cfg.shift));
        m.insert(
            "pair_probabilities".into(),
            match self.cfg.monte_carlo_samples {
                None => json!("exact piecewise integration"),
                Some(s) => json!(format!("monte_carlo:{s}")),
            },
        );
        m.insert("inverse_sum_seed".into(), json!("N(N-1)"));
        m.insert("inverse_sum_floor".into(), json!("(1-gamma) delta + gamma / (N(N-1))"));
        m.insert("fixed_point_start".into(), json!("previous strategy"));
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameters_follow_the_horizon() {
        let c = BfplsConfig::new(4, 100_000).unwrap();
        let eps = (100_000f64).ln().sqrt() / (3.0 * 400_000f64.sqrt());
        assert!((c.epsilon - eps).abs() < 1e-15);
        assert!((c.gamma - 4.0 * eps).abs() < 1e-15);
        assert!((c.shift_coeff - (1.0 + 0.5f64.sqrt()).sqrt()).abs() < 1e-15);
        assert!(BfplsConfig::new(4, 1).is_err());
    }

    #[test]
    fn first_strategy_is_uniform() {
        let mut b = Bfpls::new(BfplsConfig::new(3, 100).unwrap());
        let d = b.step(None, &mut PlayerRngs::new(0, 0)).unwrap();
        assert_eq!(d.strategy, MixedStrategy::uniform(3));
    }

    #[test]
    fn relabeling_actions_relabels_the_strategy() {
        // Feed the same reward stream to two players whose action labels
        // are reversed, forcing the same played actions (up to labels).
        let n = 3;
        let perm = [2, 1, 0];
        let cfg = BfplsConfig::new(n, 1000).unwrap();
        let mut a = Bfpls::new(cfg.clone());
        let mut b = Bfpls::new(cfg);
        let rewards = [0.2, 0.9, 0.4];
        let mut ra = PlayerRngs::new(5, 0);
        let mut rb = PlayerRngs::new(5, 0);
        let (mut la, mut lb) = (None, None);
        for _ in 0..200 {
            let da = a.step(la, &mut ra).unwrap();
            let db = b.step(lb, &mut rb).unwrap();
            for i in 0..n {
                assert!((da.strategy.prob(i) - db.strategy.prob(perm[i])).abs() < 1e-9);
            }
            // the played action of `a` drives both, relabeled for `b`
            b.last_action = perm[da.action];
            la = Some(rewards[da.action]);
            lb = la;
        }
    }

    #[test]
    fn inverse_sums_never_decrease() {
        let mut b = Bfpls::new(BfplsConfig::new(4, 500).unwrap());
        let mut r = PlayerRngs::new(2, 0);
        let mut last = None;
        let mut prev = b.inverse_sums().to_vec();
        for _ in 0..300 {
            let d = b.step(last, &mut r).unwrap();
            assert!(b.inverse_sums().iter().zip(&prev).all(|(x, y)| x >= y));
            prev = b.inverse_sums().to_vec();
            assert!(d.strategy.min_prob() >= b.cfg.gamma / 4.0 - 1e-12);
            last = Some([0.1, 0.8, 0.3, 0.5][d.action]);
        }
    }

    #[test]
    fn concentrates_on_dominant_action() {
        let n = 10_000u64;
        let cfg = BfplsConfig::new(2, n).unwrap();
        let gamma = cfg.gamma;
        let mut b = Bfpls::new(cfg);
        let mut r = PlayerRngs::new(3, 0);
        let mut last = None;
        let mut strategy = None;
        for _ in 0..n {
            let d = b.step(last, &mut r).unwrap();
            last = Some([1.0, 0.0][d.action]);
            strategy = Some(d.strategy);
        }
        let p = strategy.unwrap();
        assert!(p.prob(0) >= 1.0 - gamma - 0.05, "{p:?}");
    }

    #[test]
    fn monte_carlo_mode_tracks_quadrature() {
        let mut cfg = BfplsConfig::new(3, 200).unwrap();
        let mut b = Bfpls::new(cfg.clone());
        let mut r = PlayerRngs::new(4, 0);
        let mut last = None;
        for _ in 0..50 {
            let d = b.step(last, &mut r).unwrap();
            last = Some([0.3, 0.6, 0.2][d.action]);
        }
        let shifted = b.shifted_regrets(51);
        let exact = b.pair_distribution(&shifted, &mut r).unwrap();
        cfg.monte_carlo_samples = Some(200_000);
        b.cfg = cfg;
        let sampled = b.pair_distribution(&shifted, &mut r).unwrap();
        for (x, y) in exact.values().iter().zip(sampled.values()) {
            assert!((x - y).abs() < 6e-3);
        }
    }
}
