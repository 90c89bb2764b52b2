//! Bandit reward estimates and regret bookkeeping.
//!
//! Strategies only ever see their own realized reward. The ledger here also
//! receives the counterfactual rewards of every action, which the harness
//! takes from the environment's diagnostics, so that true regret can be
//! measured without leaking it to the learner.

use serde::{Deserialize, Serialize};

use crate::common::MixedStrategy;
use crate::error::{Error, Result};

/// Importance-weighted estimate of every action's reward from one bandit
/// observation. Unplayed actions get zero.
pub fn estimate_rewards(played: usize, observed: f64, strategy: &MixedStrategy) -> Result<Vec<f64>> {
    if played >= strategy.len() {
        return Err(Error::domain(format!("played action {played} out of range")));
    }
    let p = strategy.prob(played);
    if p <= 0.0 {
        return Err(Error::domain(format!(
            "action {played} was played with probability zero; estimate undefined"
        )));
    }
    let mut g = vec![0.0; strategy.len()];
    g[played] = observed / p;
    Ok(g)
}

/// Accumulated pairwise regrets `R(i -> j) = sum_t p_i (g(j) - g(i))`,
/// stored row-major with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapRegretTable {
    n: usize,
    table: Vec<f64>,
}

impl SwapRegretTable {
    pub fn new(n: usize) -> Self {
        SwapRegretTable {
            n,
            table: vec![0.0; n * n],
        }
    }

    pub fn num_actions(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.table[i * self.n + j]
    }

    pub fn accumulate(&mut self, strategy: &MixedStrategy, rewards: &[f64]) -> Result<()> {
        if strategy.len() != self.n || rewards.len() != self.n {
            return Err(Error::domain("swap regret update with mismatched dimensions"));
        }
        for i in 0..self.n {
            let p = strategy.prob(i);
            for j in 0..self.n {
                if i != j {
                    self.table[i * self.n + j] += p * (rewards[j] - rewards[i]);
                }
            }
        }
        Ok(())
    }

    /// Largest off-diagonal entry. For a single action this is zero.
    pub fn max(&self) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    best = best.max(self.get(i, j));
                }
            }
        }
        if best.is_finite() { best } else { 0.0 }
    }

    /// `max_i sum_j R(j -> i)`, which is the external regret of the
    /// strategies that produced the table.
    pub fn max_column_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(j, i)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.table.chunks(self.n)
    }
}

/// Per-player running sums for every regret notion, updated once per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    trials: u64,
    /// Sum of realized rewards of the played actions.
    cumulative_reward: f64,
    /// Sum over trials of the reward each fixed action would have earned.
    best_fixed_action_rewards: Vec<f64>,
    /// Sum of `sum_i p_i g(i)`.
    expected_reward_sum: f64,
    /// Sum of `sum_i p_i g~(i)`.
    estimated_reward_sum: f64,
    swap: SwapRegretTable,
}

impl RegretLedger {
    pub fn new(n: usize) -> Self {
        RegretLedger {
            trials: 0,
            cumulative_reward: 0.0,
            best_fixed_action_rewards: vec![0.0; n],
            expected_reward_sum: 0.0,
            estimated_reward_sum: 0.0,
            swap: SwapRegretTable::new(n),
        }
    }

    pub fn record(
        &mut self,
        strategy: &MixedStrategy,
        observed: f64,
        counterfactual: &[f64],
        estimates: &[f64],
    ) -> Result<()> {
        let n = self.best_fixed_action_rewards.len();
        if strategy.len() != n || counterfactual.len() != n || estimates.len() != n {
            return Err(Error::domain("regret ledger update with mismatched dimensions"));
        }
        let values = counterfactual.iter().chain(estimates).chain([&observed]);
        if values.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite reward in regret ledger update"));
        }
        self.trials += 1;
        self.cumulative_reward += observed;
        for (total, g) in self.best_fixed_action_rewards.iter_mut().zip(counterfactual) {
            *total += g;
        }
        self.expected_reward_sum += dot(strategy.probs(), counterfactual);
        self.estimated_reward_sum += dot(strategy.probs(), estimates);
        self.swap.accumulate(strategy, counterfactual)
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.cumulative_reward
    }

    pub fn best_fixed_action_rewards(&self) -> &[f64] {
        &self.best_fixed_action_rewards
    }

    pub fn expected_reward_sum(&self) -> f64 {
        self.expected_reward_sum
    }

    pub fn estimated_reward_sum(&self) -> f64 {
        self.estimated_reward_sum
    }

    pub fn swap_table(&self) -> &SwapRegretTable {
        &self.swap
    }

    fn best_fixed(&self) -> f64 {
        self.best_fixed_action_rewards
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Best fixed action in hindsight against the realized opponents, minus
    /// the realized reward. Diagnostic only: it needs counterfactuals.
    pub fn oracle_regret(&self) -> f64 {
        self.best_fixed() - self.cumulative_reward
    }

    /// Best fixed action minus the expected reward of the mixed strategies.
    pub fn external_regret(&self) -> f64 {
        self.best_fixed() - self.expected_reward_sum
    }

    /// Best fixed action minus the estimated reward of the mixed strategies.
    pub fn estimated_regret(&self) -> f64 {
        self.best_fixed() - self.estimated_reward_sum
    }

    pub fn internal_regret(&self) -> f64 {
        self.swap.max()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Internal regret of a recorded trace of (strategy, counterfactual rewards).
pub fn internal_regret<'a>(
    trace: impl IntoIterator<Item = (&'a MixedStrategy, &'a [f64])>,
) -> Result<f64> {
    let mut table: Option<SwapRegretTable> = None;
    for (strategy, rewards) in trace {
        table
            .get_or_insert_with(|| SwapRegretTable::new(strategy.len()))
            .accumulate(strategy, rewards)?;
    }
    table
        .map(|t| t.max())
        .ok_or_else(|| Error::domain("internal regret of an empty trace"))
}

/// Fewest independent runs accepted by [`hoeffding_violation_rate`].
pub const MIN_CONCENTRATION_SEEDS: usize = 100;

/// Deviation radius `sqrt((n / 2) ln(1 / delta))` that two regrets over `n`
/// trials with rewards in [0, 1] stay within, except with probability `2 delta`.
pub fn hoeffding_radius(n: u64, delta: f64) -> f64 {
    (n as f64 / 2.0 * (1.0 / delta).ln()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationCheck {
    pub radius: f64,
    pub violation_rate: f64,
    /// The rate the inequality allows, `2 delta`.
    pub allowed_rate: f64,
}

impl ConcentrationCheck {
    pub fn holds(&self) -> bool {
        self.violation_rate <= self.allowed_rate
    }
}

/// Fraction of runs whose regret gap exceeds the Hoeffding radius.
pub fn hoeffding_violation_rate(gaps: &[f64], n: u64, delta: f64) -> Result<ConcentrationCheck> {
    if gaps.len() < MIN_CONCENTRATION_SEEDS {
        return Err(Error::domain(format!(
            "concentration check needs at least {MIN_CONCENTRATION_SEEDS} runs, got {}",
            gaps.len()
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("confidence {delta} outside (0, 1)")));
    }
    let radius = hoeffding_radius(n, delta);
    let violations = gaps.iter().filter(|g| g.abs() > radius).count();
    Ok(ConcentrationCheck {
        radius,
        violation_rate: violations as f64 / gaps.len() as f64,
        allowed_rate: (2.0 * delta).min(1.0),
    })
}
