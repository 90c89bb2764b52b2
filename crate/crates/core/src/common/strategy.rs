use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RngStream;
use crate::error::{Error, Result};

/// Allowed deviation of a distribution's total mass from one.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// Total-mass drift beyond which a solver output is treated as a bug rather
/// than round-off.
const HYGIENE_TOLERANCE: f64 = 1e-9;

/// A probability vector over one player's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy(Vec<f64>);

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        MixedStrategy::new(probs)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(s: MixedStrategy) -> Self {
        s.0
    }
}

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate(&probs)?;
        Ok(MixedStrategy(probs))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform strategy over zero actions");
        MixedStrategy(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, action: usize) -> Self {
        assert!(action < n, "point mass outside action range");
        let mut probs = vec![0.0; n];
        probs[action] = 1.0;
        MixedStrategy(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.0[action]
    }

    pub fn min_prob(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn l1_distance(&self, other: &MixedStrategy) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Wraps a vector the caller has already normalized.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!(validate(&probs).is_ok(), "{probs:?}");
        MixedStrategy(probs)
    }
}

fn validate(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::domain("empty probability vector"));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::domain(format!("invalid probability entry {p}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::domain(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Draws an action index with probability `probs[i]`.
pub fn sample_from(strategy: &MixedStrategy, rng: &mut RngStream) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &p) in strategy.0.iter().enumerate() {
        if p > 0.0 {
            cumulative += p;
            last_positive = i;
            if u < cumulative {
                return i;
            }
        }
    }
    // u landed in the round-off gap above the final cumulative sum
    last_positive
}

/// Clamps negative entries to zero and rescales to unit mass. A vector that
/// is already a valid distribution is returned unchanged.
pub fn project_to_simplex(v: &[f64]) -> Result<MixedStrategy> {
    if v.is_empty() {
        return Err(Error::domain("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("cannot project a non-finite vector"));
    }
    if validate(v).is_ok() {
        return Ok(MixedStrategy(v.to_vec()));
    }
    let clamped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return Err(Error::domain("cannot project a vector with no positive mass"));
    }
    Ok(MixedStrategy(clamped.into_iter().map(|x| x / total).collect()))
}

/// Projection for solver outputs: mass drift beyond round-off is an error.
pub(crate) fn renormalize_checked(v: &[f64]) -> Result<MixedStrategy> {
    let total: f64 = v.iter().sum();
    if !total.is_finite() || (total - 1.0).abs() > HYGIENE_TOLERANCE {
        return Err(Error::Internal(format!(
            "probability mass drifted to {total} before renormalization"
        )));
    }
    project_to_simplex(v)
}
