use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The actions available to one player: every pairing of a channel with a
/// transmit power level.
///
/// Flat indices are ordered channel-major, `index = channel * num_levels +
/// level`, so with two channels and two levels the actions enumerate as
/// `(C1,P1), (C1,P2), (C2,P1), (C2,P2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawActionSpace", into = "RawActionSpace")]
pub struct ActionSpace {
    num_channels: usize,
    power_levels: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawActionSpace {
    num_channels: usize,
    power_levels: Vec<f64>,
}

impl TryFrom<RawActionSpace> for ActionSpace {
    type Error = Error;

    fn try_from(raw: RawActionSpace) -> Result<Self> {
        ActionSpace::new(raw.num_channels, raw.power_levels)
    }
}

impl From<ActionSpace> for RawActionSpace {
    fn from(space: ActionSpace) -> Self {
        RawActionSpace {
            num_channels: space.num_channels,
            power_levels: space.power_levels,
        }
    }
}

impl ActionSpace {
    /// `power_levels` are linear-scale transmit powers and must be positive
    /// and strictly increasing.
    pub fn new(num_channels: usize, power_levels: Vec<f64>) -> Result<Self> {
        if num_channels == 0 {
            return Err(Error::domain("action space needs at least one channel"));
        }
        if power_levels.is_empty() {
            return Err(Error::domain("action space needs at least one power level"));
        }
        if power_levels.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::domain("power levels must be positive and finite"));
        }
        if power_levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("power levels must be strictly increasing"));
        }
        Ok(ActionSpace {
            num_channels,
            power_levels,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn num_levels(&self) -> usize {
        self.power_levels.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_channels * self.power_levels.len()
    }

    pub fn power_levels(&self) -> &[f64] {
        &self.power_levels
    }

    pub fn encode(&self, channel: usize, level: usize) -> Result<usize> {
        if channel >= self.num_channels || level >= self.num_levels() {
            return Err(Error::domain(format!(
                "(channel {channel}, level {level}) outside {}x{} action space",
                self.num_channels,
                self.num_levels()
            )));
        }
        Ok(channel * self.num_levels() + level)
    }

    pub fn decode(&self, action: usize) -> Result<(usize, usize)> {
        if action >= self.num_actions() {
            return Err(Error::domain(format!(
                "action {action} outside space of {} actions",
                self.num_actions()
            )));
        }
        Ok((action / self.num_levels(), action % self.num_levels()))
    }

    /// Channel and transmit power of an action already known to be valid.
    pub(crate) fn channel_and_power(&self, action: usize) -> (usize, f64) {
        let levels = self.num_levels();
        (action / levels, self.power_levels[action % levels])
    }

    /// Human-readable label, one-based as in `a2:(C1,P2)`.
    pub fn label(&self, action: usize) -> String {
        match self.decode(action) {
            Ok((c, l)) => format!("a{}:(C{},P{})", action + 1, c + 1, l + 1),
            Err(_) => format!("a{}:(invalid)", action + 1),
        }
    }
}
