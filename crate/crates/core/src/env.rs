//! The interference-limited channel/power game.
//!
//! Player `k` picks a channel `c` and a power `l`; its utility is
//!
//! ```text
//! G_k = log2( l_k |h_kk,c|^2 / (sum_{q != k, c_q = c} l_q |h_qk,c|^2 + N0) ) - alpha * l_k
//! ```
//!
//! Mean-square gains are redrawn every trial from per-link intervals. The
//! utility is mapped affinely onto `[0, 1]`, perturbed by bounded zero-mean
//! noise and clipped.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::common::{ActionSpace, RngStream};
use crate::equilibrium::PayoffTensor;
use crate::error::{Error, Result};

/// Largest number of (profile, player) entries a stationary tensor may hold.
pub const MAX_TENSOR_ENTRIES: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct GainInterval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for GainInterval {
    fn from([lo, hi]: [f64; 2]) -> Self {
        GainInterval { lo, hi }
    }
}

impl From<GainInterval> for [f64; 2] {
    fn from(g: GainInterval) -> Self {
        [g.lo, g.hi]
    }
}

impl GainInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        GainInterval { lo, hi }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Serialize, Deserialize)]
struct RawChannelModel {
    /// Indexed `[channel][tx][rx]`.
    gain_intervals: Vec<Vec<Vec<GainInterval>>>,
    noise_variance: f64,
    price: f64,
}

/// Gain intervals for every (channel, transmitter, receiver) triple plus the
/// receiver noise power `N0` and the per-unit power price `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannelModel", into = "RawChannelModel")]
pub struct ChannelModel {
    num_channels: usize,
    num_players: usize,
    intervals: Vec<GainInterval>,
    noise_variance: f64,
    price: f64,
}

impl TryFrom<RawChannelModel> for ChannelModel {
    type Error = Error;

    fn try_from(raw: RawChannelModel) -> Result<Self> {
        ChannelModel::new(raw.gain_intervals, raw.noise_variance, raw.price)
    }
}

impl From<ChannelModel> for RawChannelModel {
    fn from(m: ChannelModel) -> Self {
        let k = m.num_players;
        let gain_intervals = (0..m.num_channels)
            .map(|c| {
                (0..k)
                    .map(|tx| (0..k).map(|rx| m.interval(c, tx, rx)).collect())
                    .collect()
            })
            .collect();
        RawChannelModel {
            gain_intervals,
            noise_variance: m.noise_variance,
            price: m.price,
        }
    }
}

impl ChannelModel {
    /// `gain_intervals` is indexed `[channel][tx][rx]` and must be a full
    /// `C x K x K` block.
    pub fn new(
        gain_intervals: Vec<Vec<Vec<GainInterval>>>,
        noise_variance: f64,
        price: f64,
    ) -> Result<Self> {
        let num_channels = gain_intervals.len();
        if num_channels == 0 {
            return Err(Error::domain("channel model needs at least one channel"));
        }
        let num_players = gain_intervals[0].len();
        if num_players == 0 {
            return Err(Error::domain("channel model needs at least one player"));
        }
        let mut intervals = Vec::with_capacity(num_channels * num_players * num_players);
        for (c, per_tx) in gain_intervals.iter().enumerate() {
            if per_tx.len() != num_players {
                return Err(Error::domain(format!(
                    "channel {c} has {} transmitters, expected {num_players}",
                    per_tx.len()
                )));
            }
            for (tx, per_rx) in per_tx.iter().enumerate() {
                if per_rx.len() != num_players {
                    return Err(Error::domain(format!(
                        "channel {c} tx {tx} has {} receivers, expected {num_players}",
                        per_rx.len()
                    )));
                }
                for (rx, g) in per_rx.iter().enumerate() {
                    if !(g.lo.is_finite() && g.hi.is_finite() && g.lo > 0.0 && g.lo <= g.hi) {
                        return Err(Error::domain(format!(
                            "gain interval [{}, {}] at (channel {c}, tx {tx}, rx {rx}) must satisfy 0 < lo <= hi",
                            g.lo, g.hi
                        )));
                    }
                    intervals.push(*g);
                }
            }
        }
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(Error::domain("noise variance must be positive"));
        }
        if !(price.is_finite() && price >= 0.0) {
            return Err(Error::domain("power price must be nonnegative"));
        }
        Ok(ChannelModel {
            num_channels,
            num_players,
            intervals,
            noise_variance,
            price,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn interval(&self, channel: usize, tx: usize, rx: usize) -> GainInterval {
        self.intervals[self.offset(channel, tx, rx)]
    }

    fn offset(&self, channel: usize, tx: usize, rx: usize) -> usize {
        (channel * self.num_players + tx) * self.num_players + rx
    }

    /// The same model with every interval collapsed onto its midpoint.
    pub fn stationary(&self) -> ChannelModel {
        ChannelModel {
            intervals: self
                .intervals
                .iter()
                .map(|g| {
                    let m = g.midpoint();
                    GainInterval::new(m, m)
                })
                .collect(),
            ..self.clone()
        }
    }

    pub fn midpoint_gains(&self) -> GainTensor {
        GainTensor {
            num_channels: self.num_channels,
            num_players: self.num_players,
            values: self.intervals.iter().map(GainInterval::midpoint).collect(),
        }
    }

    /// Checks that every player's channels exist in this model.
    pub fn check_spaces(&self, spaces: &[ActionSpace]) -> Result<()> {
        if spaces.len() != self.num_players {
            return Err(Error::domain(format!(
                "{} action spaces for a {}-player channel model",
                spaces.len(),
                self.num_players
            )));
        }
        for (k, s) in spaces.iter().enumerate() {
            if s.num_channels() > self.num_channels {
                return Err(Error::domain(format!(
                    "player {k} uses {} channels but the model has {}",
                    s.num_channels(),
                    self.num_channels
                )));
            }
        }
        Ok(())
    }
}

/// Realized mean-square gains for one trial, indexed `(channel, tx, rx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTensor {
    num_channels: usize,
    num_players: usize,
    values: Vec<f64>,
}

impl GainTensor {
    pub fn get(&self, channel: usize, tx: usize, rx: usize) -> f64 {
        self.values[(channel * self.num_players + tx) * self.num_players + rx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Draws every gain uniformly and independently from its interval.
pub fn draw_gains(model: &ChannelModel, rng: &mut RngStream) -> GainTensor {
    let values = model
        .intervals
        .iter()
        .map(|g| {
            if g.lo == g.hi {
                g.lo
            } else {
                g.lo + (g.hi - g.lo) * rng.random::<f64>()
            }
        })
        .collect();
    GainTensor {
        num_channels: model.num_channels,
        num_players: model.num_players,
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityVariant {
    /// Co-channel interference included.
    Full,
    /// Interference term dropped; each player's utility depends on its own action only.
    InterferenceFree,
}

fn validate_profile(profile: &[usize], spaces: &[ActionSpace]) -> Result<()> {
    if profile.len() != spaces.len() {
        return Err(Error::domain(format!(
            "profile has {} entries for {} players",
            profile.len(),
            spaces.len()
        )));
    }
    for (k, (&a, s)) in profile.iter().zip(spaces).enumerate() {
        if a >= s.num_actions() {
            return Err(Error::domain(format!(
                "player {k} action {a} outside its {} actions",
                s.num_actions()
            )));
        }
    }
    Ok(())
}

/// Utility of player `k` when it plays `action` and everyone else plays as
/// in `profile` (the entry `profile[k]` is ignored).
fn utility_of(
    k: usize,
    action: usize,
    profile: &[usize],
    gains: &GainTensor,
    model: &ChannelModel,
    spaces: &[ActionSpace],
    variant: UtilityVariant,
) -> Result<f64> {
    let (channel, power) = spaces[k].channel_and_power(action);
    let signal = power * gains.get(channel, k, k);
    let mut interference = 0.0;
    if variant == UtilityVariant::Full {
        for (q, &aq) in profile.iter().enumerate() {
            if q == k {
                continue;
            }
            let (cq, pq) = spaces[q].channel_and_power(aq);
            if cq == channel {
                interference += pq * gains.get(channel, q, k);
            }
        }
    }
    let sinr = signal / (interference + model.noise_variance);
    if !(sinr.is_finite() && sinr > 0.0) {
        return Err(Error::domain(format!(
            "nonpositive SINR {sinr} for player {k}"
        )));
    }
    Ok(sinr.log2() - model.price * power)
}

/// Per-player utility `G` of a joint profile under the given gains.
pub fn expected_utility(
    profile: &[usize],
    gains: &GainTensor,
    model: &ChannelModel,
    spaces: &[ActionSpace],
) -> Result<Vec<f64>> {
    model.check_spaces(spaces)?;
    validate_profile(profile, spaces)?;
    (0..profile.len())
        .map(|k| utility_of(k, profile[k], profile, gains, model, spaces, UtilityVariant::Full))
        .collect()
}

/// Affine map of utilities onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNormalizer", into = "RawNormalizer")]
pub struct RewardNormalizer {
    g_min: f64,
    g_max: f64,
}

#[derive(Serialize, Deserialize)]
struct RawNormalizer {
    g_min: f64,
    g_max: f64,
}

impl TryFrom<RawNormalizer> for RewardNormalizer {
    type Error = Error;

    fn try_from(raw: RawNormalizer) -> Result<Self> {
        RewardNormalizer::new(raw.g_min, raw.g_max)
    }
}

impl From<RewardNormalizer> for RawNormalizer {
    fn from(n: RewardNormalizer) -> Self {
        RawNormalizer {
            g_min: n.g_min,
            g_max: n.g_max,
        }
    }
}

impl Default for RewardNormalizer {
    fn default() -> Self {
        RewardNormalizer {
            g_min: -10.0,
            g_max: 10.0,
        }
    }
}

impl RewardNormalizer {
    pub fn new(g_min: f64, g_max: f64) -> Result<Self> {
        if !(g_min.is_finite() && g_max.is_finite() && g_min < g_max) {
            return Err(Error::domain(format!(
                "normalizer bounds [{g_min}, {g_max}] must be finite with g_min < g_max"
            )));
        }
        Ok(RewardNormalizer { g_min, g_max })
    }

    pub fn g_min(&self) -> f64 {
        self.g_min
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn normalize(&self, g: f64) -> f64 {
        self.normalize_flagged(g).0
    }

    /// Normalized value and whether it had to be clipped.
    pub fn normalize_flagged(&self, g: f64) -> (f64, bool) {
        let x = (g - self.g_min) / (self.g_max - self.g_min);
        if x < 0.0 {
            (0.0, true)
        } else if x > 1.0 {
            (1.0, true)
        } else {
            (x, false)
        }
    }
}

/// Observation noise, uniform on `[-half_width, half_width]` in normalized
/// reward units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub half_width: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { half_width: 0.02 }
    }
}

impl NoiseModel {
    pub fn new(half_width: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width >= 0.0) {
            return Err(Error::domain("noise half-width must be nonnegative"));
        }
        Ok(NoiseModel { half_width })
    }

    fn draw(&self, rng: &mut RngStream) -> f64 {
        if self.half_width == 0.0 {
            0.0
        } else {
            self.half_width * (2.0 * rng.random::<f64>() - 1.0)
        }
    }
}

/// Result of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Reward each player observes, in `[0, 1]`.
    pub observed: Vec<f64>,
    /// Normalized noise-free utility of the realized profile.
    pub expected: Vec<f64>,
    /// `counterfactual[k][i]`: what player `k` would have observed playing
    /// `i` against the others' realized actions, same gains and noise.
    /// Diagnostics only; never handed to a strategy.
    pub counterfactual: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipCounts {
    /// Realized utilities outside the normalizer bounds.
    pub utility: u64,
    /// Noisy rewards pushed back into `[0, 1]`.
    pub observation: u64,
}

/// The environment of one simulation run.
#[derive(Debug, Clone)]
pub struct Environment {
    model: ChannelModel,
    spaces: Vec<ActionSpace>,
    normalizer: RewardNormalizer,
    noise: NoiseModel,
    clips: ClipCounts,
}

impl Environment {
    pub fn new(
        model: ChannelModel,
        spaces: Vec<ActionSpace>,
        normalizer: RewardNormalizer,
        noise: NoiseModel,
    ) -> Result<Self> {
        model.check_spaces(&spaces)?;
        Ok(Environment {
            model,
            spaces,
            normalizer,
            noise,
            clips: ClipCounts::default(),
        })
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn spaces(&self) -> &[ActionSpace] {
        &self.spaces
    }

    pub fn normalizer(&self) -> RewardNormalizer {
        self.normalizer
    }

    pub fn clip_counts(&self) -> ClipCounts {
        self.clips
    }

    /// Resolves one trial: fresh gains, utilities, noise, normalization.
    pub fn step(&mut self, profile: &[usize], rng: &mut RngStream) -> Result<StepOutcome> {
        validate_profile(profile, &self.spaces)?;
        let gains = draw_gains(&self.model, rng);
        let k_players = profile.len();
        let mut observed = Vec::with_capacity(k_players);
        let mut expected = Vec::with_capacity(k_players);
        let mut counterfactual = Vec::with_capacity(k_players);
        for k in 0..k_players {
            let noise = self.noise.draw(rng);
            let n_k = self.spaces[k].num_actions();
            let mut row = Vec::with_capacity(n_k);
            for i in 0..n_k {
                let g = utility_of(
                    k,
                    i,
                    profile,
                    &gains,
                    &self.model,
                    &self.spaces,
                    UtilityVariant::Full,
                )?;
                let (x, clipped_utility) = self.normalizer.normalize_flagged(g);
                let noisy = x + noise;
                let y = noisy.clamp(0.0, 1.0);
                if i == profile[k] {
                    expected.push(x);
                    observed.push(y);
                    self.clips.utility += u64::from(clipped_utility);
                    self.clips.observation += u64::from(y != noisy);
                }
                row.push(y);
            }
            counterfactual.push(row);
        }
        Ok(StepOutcome {
            observed,
            expected,
            counterfactual,
        })
    }
}

/// Utilities of every joint profile with every gain fixed at its interval
/// midpoint. The interference-free variant drops co-channel interference.
pub fn stationary_payoff_tensor(
    model: &ChannelModel,
    spaces: &[ActionSpace],
    variant: UtilityVariant,
) -> Result<PayoffTensor> {
    model.check_spaces(spaces)?;
    let shape: Vec<usize> = spaces.iter().map(ActionSpace::num_actions).collect();
    let profiles: u128 = shape.iter().map(|&n| n as u128).product();
    let entries = profiles * shape.len() as u128;
    if entries > MAX_TENSOR_ENTRIES {
        return Err(Error::Capacity {
            what: "stationary payoff tensor",
            needed: entries,
            limit: MAX_TENSOR_ENTRIES,
        });
    }
    let gains = model.midpoint_gains();
    let k_players = shape.len();
    let mut values = Vec::with_capacity(entries as usize);
    let mut tensor = PayoffTensor::zeros(shape)?;
    for index in 0..tensor.num_profiles() {
        let profile = tensor.profile_of(index);
        for k in 0..k_players {
            values.push(utility_of(
                k,
                profile[k],
                &profile,
                &gains,
                model,
                spaces,
                variant,
            )?);
        }
    }
    tensor.set_values(values)?;
    Ok(tensor)
}
