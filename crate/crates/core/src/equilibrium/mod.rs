//! Equilibrium analytics over finite games given as payoff tensors: the
//! empirical joint distribution of play, correlated-equilibrium incentive
//! violations, the L1 distance to the correlated-equilibrium polytope, and
//! brute-force pure Nash and potential-maximizer searches.

pub mod lp;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use lp::{LinearProgram, Relation};

/// Largest game on which [`ce_distance`] will build its linear program.
pub const MAX_CE_PROFILES: usize = 10_000;

/// Payoff ties closer than this count as equal.
const TIE_TOL: f64 = 1e-12;

/// Per-player payoffs for every joint profile.
///
/// Profiles are flattened row-major with player 0 as the most significant
/// digit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffTensor {
    shape: Vec<usize>,
    strides: Vec<usize>,
    /// `values[profile * num_players + k]`
    values: Vec<f64>,
}

fn strides_for(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

impl PayoffTensor {
    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::domain("payoff tensor needs players with at least one action"));
        }
        let profiles = shape
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .and_then(|p| p.checked_mul(shape.len()))
            .ok_or_else(|| Error::domain("payoff tensor shape overflows"))?;
        let strides = strides_for(&shape);
        Ok(PayoffTensor {
            values: vec![0.0; profiles],
            shape,
            strides,
        })
    }

    /// Builds a tensor by calling `payoffs(profile)` for every profile.
    pub fn from_fn(shape: Vec<usize>, mut payoffs: impl FnMut(&[usize]) -> Vec<f64>) -> Result<Self> {
        let mut tensor = PayoffTensor::zeros(shape)?;
        let k = tensor.num_players();
        for index in 0..tensor.num_profiles() {
            let profile = tensor.profile_of(index);
            let row = payoffs(&profile);
            if row.len() != k {
                return Err(Error::domain("payoff row length differs from player count"));
            }
            tensor.values[index * k..(index + 1) * k].copy_from_slice(&row);
        }
        tensor.check_finite()?;
        Ok(tensor)
    }

    pub(crate) fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::Internal("payoff value count mismatch".into()));
        }
        self.values = values;
        self.check_finite()
    }

    fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::domain("payoff tensor has non-finite entries"))
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn num_players(&self) -> usize {
        self.shape.len()
    }

    pub fn num_profiles(&self) -> usize {
        self.values.len() / self.shape.len()
    }

    pub fn profile_index(&self, profile: &[usize]) -> usize {
        profile.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn profile_of(&self, mut index: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|&s| {
                let a = index / s;
                index %= s;
                a
            })
            .collect()
    }

    pub fn payoff(&self, index: usize, player: usize) -> f64 {
        self.values[index * self.shape.len() + player]
    }

    /// Index of the profile where `player` switches to `action`.
    pub fn deviate(&self, index: usize, player: usize, action: usize) -> usize {
        let current = (index / self.strides[player]) % self.shape[player];
        index - current * self.strides[player] + action * self.strides[player]
    }

    pub fn action_of(&self, index: usize, player: usize) -> usize {
        (index / self.strides[player]) % self.shape[player]
    }

    /// Same tensor with a constant added to every payoff of `player`.
    pub fn shifted(&self, player: usize, offset: f64) -> PayoffTensor {
        let mut out = self.clone();
        let k = self.num_players();
        for index in 0..self.num_profiles() {
            out.values[index * k + player] += offset;
        }
        out
    }

    /// True when no player's payoff depends on the other players' actions.
    pub fn is_separable(&self) -> bool {
        (0..self.num_profiles()).all(|index| {
            (0..self.num_players()).all(|k| {
                (0..self.num_players()).filter(|&q| q != k).all(|q| {
                    (0..self.shape[q]).all(|b| {
                        let other = self.deviate(index, q, b);
                        (self.payoff(other, k) - self.payoff(index, k)).abs() <= TIE_TOL
                    })
                })
            })
        })
    }
}

/// Frequency table of realized joint profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalJointDistribution {
    shape: Vec<usize>,
    strides: Vec<usize>,
    counts: BTreeMap<usize, u64>,
    total: u64,
}

impl EmpiricalJointDistribution {
    pub fn new(shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::domain("joint distribution needs players with actions"));
        }
        let strides = strides_for(&shape);
        Ok(EmpiricalJointDistribution {
            shape,
            strides,
            counts: BTreeMap::new(),
            total: 0,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn update(&mut self, profile: &[usize]) -> Result<()> {
        if profile.len() != self.shape.len()
            || profile.iter().zip(&self.shape).any(|(a, n)| a >= n)
        {
            return Err(Error::domain(format!("profile {profile:?} outside shape {:?}", self.shape)));
        }
        let index = profile.iter().zip(&self.strides).map(|(a, s)| a * s).sum();
        *self.counts.entry(index).or_insert(0) += 1;
        self.total += 1;
        Ok(())
    }

    pub fn count(&self, profile: &[usize]) -> u64 {
        let index: usize = profile.iter().zip(&self.strides).map(|(a, s)| a * s).sum();
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn frequency(&self, profile: &[usize]) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(profile) as f64 / self.total as f64
        }
    }

    /// Observed profiles with their frequencies, in flat-index order.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let total = self.total as f64;
        self.counts.iter().map(move |(&i, &c)| (i, c as f64 / total))
    }

    /// Dense frequency vector over all flat profile indices.
    pub fn to_dense(&self) -> Vec<f64> {
        let n: usize = self.shape.iter().product();
        let mut dense = vec![0.0; n];
        for (i, f) in self.support() {
            dense[i] = f;
        }
        dense
    }
}

fn check_shape(freqs_len: usize, shape: &[usize], payoffs: &PayoffTensor) -> Result<()> {
    if shape != payoffs.shape() || freqs_len != payoffs.num_profiles() {
        return Err(Error::domain(format!(
            "distribution shape {shape:?} does not match payoff tensor {:?}",
            payoffs.shape()
        )));
    }
    Ok(())
}

/// Largest expected gain any player could collect by always replacing one
/// of its actions with another, under the joint distribution `freqs`
/// (dense, flat-indexed). Nonpositive exactly on the correlated equilibria.
pub fn ce_violation_dense(freqs: &[f64], payoffs: &PayoffTensor) -> Result<f64> {
    check_shape(freqs.len(), payoffs.shape(), payoffs)?;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..payoffs.num_players() {
        let n = payoffs.shape()[k];
        let mut gains = vec![0.0; n * n];
        for (index, &f) in freqs.iter().enumerate() {
            if f == 0.0 {
                continue;
            }
            let i = payoffs.action_of(index, k);
            let base = payoffs.payoff(index, k);
            for j in 0..n {
                if j != i {
                    gains[i * n + j] += f * (payoffs.payoff(payoffs.deviate(index, k, j), k) - base);
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(gains[i * n + j]);
                }
            }
        }
    }
    // single-action players have no deviations
    Ok(if worst.is_finite() { worst } else { 0.0 })
}

pub fn ce_violation(dist: &EmpiricalJointDistribution, payoffs: &PayoffTensor) -> Result<f64> {
    if dist.total() == 0 {
        return Err(Error::domain("empty empirical distribution"));
    }
    check_shape(payoffs.num_profiles(), dist.shape(), payoffs)?;
    ce_violation_dense(&dist.to_dense(), payoffs)
}

/// L1 distance from `freqs` to the correlated-equilibrium polytope of the
/// game, solved exactly as a linear program.
///
/// Writing `pi = freqs + up - down` with `up >= 0` and `0 <= down <= freqs`,
/// the program minimizes `sum(up) + sum(down)` subject to total mass zero
/// for the correction and every incentive constraint. An optimum never moves
/// mass both up and down on one profile, so the bound on `down` is exactly
/// the nonnegativity of `pi`.
pub fn ce_distance_dense(freqs: &[f64], payoffs: &PayoffTensor) -> Result<f64> {
    check_shape(freqs.len(), payoffs.shape(), payoffs)?;
    let p = payoffs.num_profiles();
    if p > MAX_CE_PROFILES {
        return Err(Error::Capacity {
            what: "correlated-equilibrium distance program",
            needed: p as u128,
            limit: MAX_CE_PROFILES as u128,
        });
    }
    let support: Vec<usize> = (0..p).filter(|&i| freqs[i] > 0.0).collect();
    let n_vars = p + support.len();
    let mut program = LinearProgram::minimize(vec![1.0; n_vars]);
    for (slot, &i) in support.iter().enumerate() {
        program.set_upper(p + slot, freqs[i]);
    }

    let mut balance = vec![1.0; n_vars];
    for v in balance.iter_mut().skip(p) {
        *v = -1.0;
    }
    program.add_row(balance, Relation::Eq, 0.0);

    for k in 0..payoffs.num_players() {
        let n = payoffs.shape()[k];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut coeffs = vec![0.0; n_vars];
                let mut rhs = 0.0;
                for index in 0..p {
                    if payoffs.action_of(index, k) != i {
                        continue;
                    }
                    let d = payoffs.payoff(payoffs.deviate(index, k, j), k) - payoffs.payoff(index, k);
                    coeffs[index] = d;
                    rhs -= freqs[index] * d;
                }
                for (slot, &index) in support.iter().enumerate() {
                    coeffs[p + slot] = -coeffs[index];
                }
                program.add_row(coeffs, Relation::Le, rhs);
            }
        }
    }
    let solution = program.solve().map_err(|e| match e {
        lp::LpError::Infeasible(_) => Error::Internal(
            "correlated-equilibrium program infeasible; finite games always have one".into(),
        ),
        other => Error::Lp(other),
    })?;
    Ok(solution.objective.max(0.0))
}

pub fn ce_distance(dist: &EmpiricalJointDistribution, payoffs: &PayoffTensor) -> Result<f64> {
    if dist.total() == 0 {
        return Err(Error::domain("empty empirical distribution"));
    }
    check_shape(payoffs.num_profiles(), dist.shape(), payoffs)?;
    ce_distance_dense(&dist.to_dense(), payoffs)
}

/// Every profile at which no player gains by a unilateral deviation.
pub fn brute_force_pure_nash(payoffs: &PayoffTensor) -> Vec<Vec<usize>> {
    (0..payoffs.num_profiles())
        .filter(|&index| {
            (0..payoffs.num_players()).all(|k| {
                let here = payoffs.payoff(index, k);
                (0..payoffs.shape()[k])
                    .all(|a| payoffs.payoff(payoffs.deviate(index, k, a), k) <= here + TIE_TOL)
            })
        })
        .map(|index| payoffs.profile_of(index))
        .collect()
}

/// Profiles maximizing `score`, with near-ties all returned.
pub(crate) fn argmax_profiles(
    payoffs: &PayoffTensor,
    mut score: impl FnMut(usize) -> f64,
) -> Vec<Vec<usize>> {
    let scores: Vec<f64> = (0..payoffs.num_profiles()).map(&mut score).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= best - TIE_TOL)
        .map(|(i, _)| payoffs.profile_of(i))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialMaximum {
    /// All maximizers of the summed payoff, in flat-index order.
    pub profiles: Vec<Vec<usize>>,
    pub tied: bool,
}

/// Maximizer of the summed payoff of an interference-free game, which is
/// its potential function.
pub fn potential_maximizer(payoffs: &PayoffTensor) -> Result<PotentialMaximum> {
    if !payoffs.is_separable() {
        return Err(Error::domain(
            "potential maximizer needs an interference-free (separable) payoff tensor",
        ));
    }
    let k = payoffs.num_players();
    let profiles = argmax_profiles(payoffs, |i| (0..k).map(|q| payoffs.payoff(i, q)).sum());
    Ok(PotentialMaximum {
        tied: profiles.len() > 1,
        profiles,
    })
}
