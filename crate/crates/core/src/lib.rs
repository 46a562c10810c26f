pub mod agent;
pub mod baselines;
pub mod env;
pub mod error;
pub mod exec;
pub mod healing;
pub mod harness;
pub mod monitor;
pub mod rng;
