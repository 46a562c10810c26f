use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::discrete::{BinBounds, DiscreteState};
use crate::env::ActionId;
use crate::error::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum QTableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
}

/// Dense action-value table, initialised to zero.
///
/// The index-level API (`value_at`, `update_at`) works for any table shape;
/// the typed API maps `DiscreteState` and `ActionId` through the bin bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    bounds: BinBounds,
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    rho_bin: u8,
    cpu_bin: u8,
    mem_bin: u8,
    drift_bin: u8,
    stage: String,
    last_action: String,
    last_succeeded: bool,
    action: String,
    value: f64,
}

impl QTable {
    pub fn new(bounds: BinBounds) -> Self {
        let n_states = bounds.state_count();
        Self::with_shape(bounds, n_states, ActionId::COUNT)
    }

    /// A table of arbitrary shape. Typed accessors are only meaningful when
    /// the shape matches `bounds`.
    pub fn with_shape(bounds: BinBounds, n_states: usize, n_actions: usize) -> Self {
        QTable {
            bounds,
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn bounds(&self) -> &BinBounds {
        &self.bounds
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn value_at(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set_at(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max_at(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest index among the maximal entries of row `s`.
    pub fn argmax_at(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for (i, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = i;
            }
        }
        best
    }

    /// One tabular Q-learning backup. The bootstrap term is dropped when
    /// `terminal` is set.
    #[allow(clippy::too_many_arguments)]
    pub fn update_at(&mut self, s: usize, a: usize, reward: f64, s_next: usize, terminal: bool, lr: f64, discount: f64) {
        let future = if terminal { 0.0 } else { self.max_at(s_next) };
        let q = self.value_at(s, a);
        self.set_at(s, a, (1.0 - lr) * q + lr * (reward + discount * future));
    }

    pub fn value(&self, s: &DiscreteState, a: ActionId) -> f64 {
        self.value_at(self.bounds.index(s), a.index())
    }

    pub fn set(&mut self, s: &DiscreteState, a: ActionId, v: f64) {
        let i = self.bounds.index(s);
        self.set_at(i, a.index(), v);
    }

    pub fn greedy(&self, s: &DiscreteState) -> ActionId {
        ActionId::from_index(self.argmax_at(self.bounds.index(s))).expect("action table shape")
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn nonzero(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// Writes every non-zero entry, one row per (state, action).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), QTableError> {
        let mut out = csv::Writer::from_writer(w);
        for s in 0..self.n_states {
            let st = self.bounds.state_at(s);
            for a in 0..self.n_actions {
                let v = self.value_at(s, a);
                if v == 0.0 {
                    continue;
                }
                out.serialize(CsvRow {
                    rho_bin: st.rho_bin,
                    cpu_bin: st.cpu_bin,
                    mem_bin: st.mem_bin,
                    drift_bin: st.drift_bin,
                    stage: st.stage.name().to_string(),
                    last_action: st.last_action.name().to_string(),
                    last_succeeded: st.last_succeeded,
                    action: ActionId::from_index(a).expect("action").name().to_string(),
                    value: v,
                })?;
            }
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, bounds: BinBounds) -> Result<Self, QTableError> {
        let mut table = QTable::new(bounds);
        let mut rdr = csv::Reader::from_reader(r);
        for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
            let row = row?;
            let bad = |reason: String| QTableError::Row { row: i + 1, reason };
            let stage = crate::env::StageId::ALL
                .into_iter()
                .find(|s| s.name() == row.stage)
                .ok_or_else(|| bad(format!("unknown stage {}", row.stage)))?;
            let find_action = |n: &str| ActionId::ALL.into_iter().find(|a| a.name() == n);
            let last_action = find_action(&row.last_action).ok_or_else(|| bad(format!("unknown action {}", row.last_action)))?;
            let action = find_action(&row.action).ok_or_else(|| bad(format!("unknown action {}", row.action)))?;
            let st = DiscreteState {
                rho_bin: row.rho_bin,
                cpu_bin: row.cpu_bin,
                mem_bin: row.mem_bin,
                drift_bin: row.drift_bin,
                stage,
                last_action,
                last_succeeded: row.last_succeeded,
            };
            if st.rho_bin as usize >= bounds.rho
                || st.cpu_bin as usize >= bounds.cpu
                || st.mem_bin as usize >= bounds.mem
                || st.drift_bin as usize >= bounds.drift
            {
                return Err(bad("bin out of range".into()));
            }
            table.set(&st, action, row.value);
        }
        Ok(table)
    }
}

/// Checks learning rate and discount lie in their admissible ranges.
pub fn validate_rates(lr: f64, discount: f64) -> Result<(), ConfigError> {
    if !(lr > 0.0 && lr <= 1.0) {
        return Err(ConfigError::new("agent.learning_rate", format!("is {lr}, must lie in (0, 1]")));
    }
    if !(0.0..1.0).contains(&discount) {
        return Err(ConfigError::new("agent.discount", format!("is {discount}, must lie in [0, 1)")));
    }
    Ok(())
}
