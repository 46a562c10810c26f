use serde::{Deserialize, Serialize};

use super::config::AgentConfig;
use super::discrete::discretize;
use super::policy::{q_update, select_action};
use super::qtable::QTable;
use super::replay::{replay_sample, ReplayBuffer, Transition};
use super::reward::{compute_reward, RewardComponents};
use crate::env::{reset, PipelineConfig};
use crate::error::{ConfigError, EnvError};
use crate::healing::{HealingConfig, HealingError, Orchestrator};
use crate::monitor::{MonitorConfig, SecurityMonitor};
use crate::rng::{derive_seed, stream, Domain};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Healing(#[from] HealingError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: u64,
    pub total_reward: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedAgent {
    pub q: QTable,
    pub curve: Vec<CurvePoint>,
}

/// Trains with default monitor and orchestrator settings.
pub fn train(env: &PipelineConfig, agent: &AgentConfig) -> Result<TrainedAgent, TrainError> {
    train_with(env, agent, &MonitorConfig::default(), &HealingConfig::default())
}

/// Episode `i` runs on `env` reseeded from `(env.rng_seed, i)`, so the
/// training sequence is fixed by the base seed alone.
pub fn train_with(
    env: &PipelineConfig,
    agent: &AgentConfig,
    monitor: &MonitorConfig,
    healing: &HealingConfig,
) -> Result<TrainedAgent, TrainError> {
    env.validate()?;
    agent.validate()?;
    monitor.validate()?;
    healing.validate()?;

    let mut q = QTable::new(agent.bins);
    let mut curve = Vec::with_capacity(agent.episodes as usize);
    let mut buffer = ReplayBuffer::new(agent.buffer_capacity);
    let mut rng = stream(env.rng_seed, Domain::Agent, &[]);
    let mut mon = SecurityMonitor::new(monitor.clone());
    let mut orch = Orchestrator::new(HealingConfig { enabled: true, ..healing.clone() });

    for episode in 0..agent.episodes {
        let epsilon = agent.epsilon.at(episode);
        let cfg = env.clone().with_seed(derive_seed(env.rng_seed, Domain::TrainEpisode, &[episode]));
        let (mut sim, first) = reset(cfg)?;
        mon.reset();
        let mut obs = mon.observe(first.events(), sim.state());
        let mut s = discretize(&obs.features, &agent.bins);
        let mut total = 0.0;
        while !sim.is_done() {
            let a = select_action(&q, &s, epsilon, &mut rng);
            let tick = orch.tick(&mut sim, a, obs.features.rho)?;
            let f = &tick.outcome.facts;
            let r = compute_reward(
                RewardComponents {
                    delta_u: f.uptime_after - f.uptime_before,
                    mitigation_success: tick.verified,
                    disruption_cost: f.disruption_cost,
                },
                agent.coefficients,
            );
            mon.record(a, tick.verified);
            obs = mon.observe(tick.outcome.events.events(), sim.state());
            let next = discretize(&obs.features, &agent.bins);
            buffer.push(Transition {
                state: s,
                action: a,
                reward: r,
                next_state: next,
                terminal: tick.outcome.done,
            });
            if let Ok(batch) = replay_sample(&buffer, agent.batch_size, &mut rng) {
                for t in &batch {
                    q_update(&mut q, t, agent.learning_rate, agent.discount);
                }
            }
            s = next;
            total += r;
        }
        orch.take_log();
        curve.push(CurvePoint {
            episode: episode + 1,
            total_reward: total,
            epsilon,
        });
    }
    Ok(TrainedAgent { q, curve })
}
