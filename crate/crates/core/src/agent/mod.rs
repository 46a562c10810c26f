//! Tabular Q-learning over discretised monitor observations.

mod config;
mod discrete;
mod policy;
mod qtable;
mod replay;
mod reward;
mod train;

pub use config::{AgentConfig, EpsilonSchedule};
pub use discrete::{discretize, BinBounds, DiscreteState};
pub use policy::{q_update, select_action};
pub use qtable::{QTable, QTableError};
pub use replay::{replay_sample, ReplayBuffer, Transition, UnderfullBuffer};
pub use reward::{compute_reward, RewardCoefficients, RewardComponents};
pub use train::{train, train_with, CurvePoint, TrainError, TrainedAgent};
