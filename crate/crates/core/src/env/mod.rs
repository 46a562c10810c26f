//! Discrete-time CI/CD pipeline simulator with episodic reset/step semantics.

mod config;
pub mod log;
mod sim;
mod types;

pub use config::{
    ActionEffect, ActionEffectTable, AttackSchedule, Dynamics, EffectCost, PipelineConfig,
    RandomArrivals, ScheduledAttack,
};
pub use sim::{reset, ControlPlane, PipelineEnv, StepFacts, StepOutcome};
pub use types::*;
