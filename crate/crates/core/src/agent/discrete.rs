use serde::{Deserialize, Serialize};

use crate::env::{ActionId, StageId};
use crate::error::ConfigError;
use crate::monitor::FeatureVector;

/// Bin counts for each continuous observation field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinBounds {
    pub rho: usize,
    pub cpu: usize,
    pub mem: usize,
    pub drift: usize,
    /// Drift values at or above this land in the top bin.
    pub drift_cap: f64,
}

impl Default for BinBounds {
    fn default() -> Self {
        BinBounds {
            rho: 10,
            cpu: 3,
            mem: 3,
            drift: 2,
            drift_cap: 0.4,
        }
    }
}

impl BinBounds {
    pub fn state_count(&self) -> usize {
        self.rho * self.cpu * self.mem * self.drift * StageId::ALL.len() * ActionId::COUNT * 2
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (f, v) in [
            ("agent.bins.rho", self.rho),
            ("agent.bins.cpu", self.cpu),
            ("agent.bins.mem", self.mem),
            ("agent.bins.drift", self.drift),
        ] {
            if v == 0 || v > 256 {
                return Err(ConfigError::new(f, format!("is {v}, must lie in 1..=256")));
            }
        }
        if !(self.drift_cap.is_finite() && self.drift_cap > 0.0) {
            return Err(ConfigError::new("agent.bins.drift_cap", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Row-major index of a state, `last_succeeded` varying fastest.
    pub fn index(&self, s: &DiscreteState) -> usize {
        let mut i = s.rho_bin as usize;
        i = i * self.cpu + s.cpu_bin as usize;
        i = i * self.mem + s.mem_bin as usize;
        i = i * self.drift + s.drift_bin as usize;
        i = i * StageId::ALL.len() + s.stage.index();
        i = i * ActionId::COUNT + s.last_action.index();
        i * 2 + s.last_succeeded as usize
    }

    pub fn state_at(&self, mut i: usize) -> DiscreteState {
        let last_succeeded = i % 2 == 1;
        i /= 2;
        let last_action = ActionId::from_index(i % ActionId::COUNT).expect("in range");
        i /= ActionId::COUNT;
        let stage = StageId::from_index(i % StageId::ALL.len()).expect("in range");
        i /= StageId::ALL.len();
        let drift_bin = (i % self.drift) as u8;
        i /= self.drift;
        let mem_bin = (i % self.mem) as u8;
        i /= self.mem;
        let cpu_bin = (i % self.cpu) as u8;
        i /= self.cpu;
        DiscreteState {
            rho_bin: i as u8,
            cpu_bin,
            mem_bin,
            drift_bin,
            stage,
            last_action,
            last_succeeded,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscreteState {
    pub rho_bin: u8,
    pub cpu_bin: u8,
    pub mem_bin: u8,
    pub drift_bin: u8,
    pub stage: StageId,
    pub last_action: ActionId,
    /// Whether `last_action` was verified.
    pub last_succeeded: bool,
}

fn bin(x: f64, lo: f64, hi: f64, n: usize) -> u8 {
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    ((t * n as f64) as usize).min(n - 1) as u8
}

/// Uniform binning of rho/cpu/mem over [0, 1] and of drift over [0, cap].
pub fn discretize(fv: &FeatureVector, bounds: &BinBounds) -> DiscreteState {
    DiscreteState {
        rho_bin: bin(fv.rho, 0.0, 1.0, bounds.rho),
        cpu_bin: bin(fv.cpu, 0.0, 1.0, bounds.cpu),
        mem_bin: bin(fv.mem, 0.0, 1.0, bounds.mem),
        drift_bin: bin(fv.dep_drift, 0.0, bounds.drift_cap, bounds.drift),
        stage: fv.stage,
        last_action: fv.last_action(),
        last_succeeded: fv.hist_acts.last().is_some_and(|h| h.succeeded),
    }
}
