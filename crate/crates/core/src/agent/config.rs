use serde::{Deserialize, Serialize};

use super::discrete::BinBounds;
use super::qtable::validate_rates;
use super::reward::RewardCoefficients;
use crate::error::ConfigError;

/// Linear decay from `start` to `end` over the first `decay_episodes`
/// episodes, then constant at `end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_episodes: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            start: 1.0,
            end: 0.05,
            decay_episodes: 500,
        }
    }
}

impl EpsilonSchedule {
    /// Epsilon for the zero-based `episode`.
    pub fn at(&self, episode: u64) -> f64 {
        if episode >= self.decay_episodes {
            return self.end;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        self.start + (self.end - self.start) * frac
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (f, v) in [("agent.epsilon.start", self.start), ("agent.epsilon.end", self.end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::new(f, format!("is {v}, must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon: EpsilonSchedule,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub episodes: u64,
    pub coefficients: RewardCoefficients,
    pub bins: BinBounds,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            learning_rate: 0.05,
            discount: 0.95,
            epsilon: EpsilonSchedule::default(),
            buffer_capacity: 10_000,
            batch_size: 32,
            episodes: 5000,
            coefficients: RewardCoefficients::default(),
            bins: BinBounds::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        validate_rates(self.learning_rate, self.discount)?;
        self.epsilon.validate()?;
        self.coefficients.validate()?;
        self.bins.validate()?;
        if self.buffer_capacity == 0 {
            return Err(ConfigError::new("agent.buffer_capacity", "must be positive"));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return Err(ConfigError::new(
                "agent.batch_size",
                format!("is {}, must lie in 1..={}", self.batch_size, self.buffer_capacity),
            ));
        }
        Ok(())
    }
}
