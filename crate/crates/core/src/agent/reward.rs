use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Weights of the step reward: uptime change, mitigation success, and
/// disruption penalty. `gamma_cost` is the disruption weight, not the
/// discount factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_cost: f64,
}

impl Default for RewardCoefficients {
    fn default() -> Self {
        RewardCoefficients {
            alpha: 20.0,
            beta: 5.0,
            gamma_cost: 4.0,
        }
    }
}

impl RewardCoefficients {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (f, v) in [
            ("agent.coefficients.alpha", self.alpha),
            ("agent.coefficients.beta", self.beta),
            ("agent.coefficients.gamma_cost", self.gamma_cost),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::new(f, format!("is {v}, must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents {
    /// uptime(t+1) - uptime(t)
    pub delta_u: f64,
    pub mitigation_success: bool,
    pub disruption_cost: f64,
}

pub fn compute_reward(c: RewardComponents, k: RewardCoefficients) -> f64 {
    let s = if c.mitigation_success { 1.0 } else { 0.0 };
    k.alpha * c.delta_u + k.beta * s - k.gamma_cost * c.disruption_cost
}
