use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, SystemId};
use super::metrics::{aggregate, compute_metrics, recoveries, IntegrityError, MetricsReport, Recovery, RunMetrics, SeedRow};
use crate::agent::{discretize, train_with, QTable, TrainError, TrainedAgent};
use crate::baselines::{
    baseline_remediate, ids_match, tadm_detect, tadm_features, tadm_fit, warmup_points, BaselineKind, Cooldown,
    PcaError, RuleParseError, RuleSet, TadmError, TadmModel,
};
use crate::env::{reset, ActionId, GroundTruth, IncidentEnd, IncidentRecord, TelemetryEvent};
use crate::error::{ConfigError, EnvError};
use crate::healing::{HealingError, HealingRecord, Orchestrator};
use crate::monitor::{DetectionVerdict, SecurityMonitor};
use crate::rng::{derive_seed, Domain};

/// One decision window of an evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub step: u64,
    pub episode: u64,
    pub alert: bool,
    pub score: f64,
    /// Action the system chose, whether or not it was carried out.
    pub action: ActionId,
    pub truth: GroundTruth,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Healing(#[from] HealingError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Tadm(#[from] TadmError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Integrity(#[from] IntegrityError),
    #[error("no trained Q-table supplied")]
    MissingQTable,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("rule file {path}: {reason}")]
    Rules { path: String, reason: String },
    #[error("{system} seed {seed}: {source}")]
    Run { system: SystemId, seed: u64, source: RunError },
    #[error("{0}")]
    Io(String),
}

impl From<(String, RuleParseError)> for HarnessError {
    fn from((path, e): (String, RuleParseError)) -> Self {
        HarnessError::Rules { path, reason: e.to_string() }
    }
}

/// Everything one (system, seed) evaluation produced.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub system: SystemId,
    pub seed: u64,
    pub events: Vec<TelemetryEvent>,
    pub event_truth: Vec<GroundTruth>,
    pub windows: Vec<WindowRecord>,
    pub healing: Vec<HealingRecord>,
    pub incidents: Vec<IncidentRecord>,
    pub recoveries: Vec<Recovery>,
    pub exogenous_sha256: String,
    pub trained: Option<TrainedAgent>,
    pub metrics: RunMetrics,
}

impl RunArtifacts {
    pub fn events_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        crate::env::log::write_jsonl(&mut buf, &self.events).expect("in-memory write");
        buf
    }

    pub fn events_sha256(&self) -> String {
        hex::encode(Sha256::digest(self.events_jsonl()))
    }

    pub fn seed_row(&self) -> SeedRow {
        SeedRow {
            seed: self.seed,
            metrics: self.metrics.clone(),
            events_sha256: self.events_sha256(),
            exogenous_sha256: self.exogenous_sha256.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub reports: Vec<MetricsReport>,
    pub runs: Vec<RunArtifacts>,
}

pub fn load_rules(cfg: &ExperimentConfig) -> Result<RuleSet, HarnessError> {
    match &cfg.baselines.rules_file {
        None => Ok(RuleSet::default_rules()),
        Some(p) => {
            let path = p.display().to_string();
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Rules { path: path.clone(), reason: e.to_string() })?;
            text.parse().map_err(|e| (path, e).into())
        }
    }
}

/// Seed of evaluation episode `e` under run seed `seed`; shared by all
/// systems so they face identical workloads.
pub fn eval_episode_seed(seed: u64, episode: u64) -> u64 {
    derive_seed(seed, Domain::EvalEpisode, &[episode])
}

pub fn fit_tadm(cfg: &ExperimentConfig, seed: u64) -> Result<TadmModel, RunError> {
    let t = &cfg.baselines.tadm;
    let pts = warmup_points(&cfg.env, cfg.monitor.metric_baseline, t.warmup_steps, derive_seed(seed, Domain::Warmup, &[]))?;
    Ok(tadm_fit(&pts, t, derive_seed(seed, Domain::Forest, &[]), cfg.execution)?)
}

pub fn train_agent(cfg: &ExperimentConfig, seed: u64) -> Result<TrainedAgent, RunError> {
    Ok(train_with(&cfg.env.with_seed(seed), &cfg.agent, &cfg.monitor, &cfg.healing)?)
}

enum Controller<'a> {
    Agent(&'a QTable),
    Ids(&'a RuleSet, Cooldown),
    Tadm(&'a TadmModel, Cooldown),
}

/// Evaluates one system on the held-out episodes of `seed`. AutoGuard acts
/// greedily from `q`; its verdict for a window is whether it chose to act.
pub fn evaluate_run(
    cfg: &ExperimentConfig,
    system: SystemId,
    seed: u64,
    q: Option<&QTable>,
    rules: &RuleSet,
    tadm: Option<&TadmModel>,
) -> Result<RunArtifacts, RunError> {
    let stride = cfg.env.episode_length + 1;
    let mut events = Vec::new();
    let mut event_truth = Vec::new();
    let mut windows = Vec::new();
    let mut verdicts = Vec::new();
    let mut truth = Vec::new();
    let mut healing = Vec::new();
    let mut incidents = Vec::new();
    let mut recs = Vec::new();
    let mut exo = Sha256::new();

    for episode in 0..cfg.evaluation_episodes {
        let off = episode * stride;
        let env_cfg = cfg.env.with_seed(eval_episode_seed(seed, episode));
        let (mut env, first) = reset(env_cfg)?;
        exo.update(serde_json::to_vec(env.schedule()).expect("schedule serializes"));
        let mut mon = SecurityMonitor::new(cfg.monitor.clone());
        let mut orch = Orchestrator::new(cfg.healing.clone());
        let mut ctl = match system {
            SystemId::Autoguard => Controller::Agent(q.ok_or(RunError::MissingQTable)?),
            SystemId::StaticIds => Controller::Ids(rules, Cooldown::new(cfg.baselines.cooldown_steps)),
            SystemId::Tadm => Controller::Tadm(tadm.expect("TADM model fitted"), Cooldown::new(cfg.baselines.cooldown_steps)),
        };
        let mut batch = first;
        let mut obs = mon.observe(batch.events(), env.state());
        loop {
            for (e, t) in batch.iter() {
                let e = TelemetryEvent { step: e.step + off, ..e.clone() };
                if !t.is_malicious() {
                    exo.update(serde_json::to_vec(&e).expect("event serializes"));
                }
                events.push(e);
                event_truth.push(t);
            }
            if env.is_done() {
                break;
            }
            let t = env.state().step;
            let (verdict, action) = match &mut ctl {
                Controller::Agent(q) => {
                    let a = q.greedy(&discretize(&obs.features, &cfg.agent.bins));
                    (DetectionVerdict { step: t, alert: a != ActionId::NoOp, score: obs.features.rho }, a)
                }
                Controller::Ids(rules, cd) => {
                    let v = ids_match(rules, batch.events(), t);
                    (v, cd.gate(t, baseline_remediate(&v, BaselineKind::StaticIds)))
                }
                Controller::Tadm(model, cd) => {
                    let v = tadm_detect(model, &tadm_features(obs.signals, env.state()), t)?;
                    (v, cd.gate(t, baseline_remediate(&v, BaselineKind::Tadm)))
                }
            };
            windows.push(WindowRecord {
                step: t + off,
                episode,
                alert: verdict.alert,
                score: verdict.score,
                action,
                truth: env.state().label(),
            });
            verdicts.push(DetectionVerdict { step: t + off, ..verdict });
            let tick = orch.tick(&mut env, action, obs.features.rho)?;
            mon.record(action, tick.verified);
            obs = mon.observe(tick.outcome.events.events(), env.state());
            batch = tick.outcome.events;
        }
        let log = orch.take_log();
        let end = env.state().step;
        recs.extend(recoveries(env.incidents(), &log, end).into_iter().map(|r| Recovery {
            onset_step: r.onset_step + off,
            ..r
        }));
        truth.extend(env.ground_truth_log().into_iter().map(|(s, l)| (s + off, l)));
        healing.extend(log.into_iter().map(|h| HealingRecord { step: h.step + off, ..h }));
        incidents.extend(env.incidents().iter().map(|i| IncidentRecord {
            onset_step: i.onset_step + off,
            end: match i.end {
                IncidentEnd::Remediated { step } => IncidentEnd::Remediated { step: step + off },
                IncidentEnd::TimedOut { step } => IncidentEnd::TimedOut { step: step + off },
                IncidentEnd::Unresolved => IncidentEnd::Unresolved,
            },
            ..i.clone()
        }));
    }
    let metrics = compute_metrics(&verdicts, &truth, &recs, None)?;
    Ok(RunArtifacts {
        system,
        seed,
        events,
        event_truth,
        windows,
        healing,
        incidents,
        recoveries: recs,
        exogenous_sha256: hex::encode(exo.finalize()),
        trained: None,
        metrics,
    })
}

/// Trains or fits whatever `system` needs for `seed`, then evaluates it.
/// A supplied Q-table skips AutoGuard training.
pub fn run_one(
    cfg: &ExperimentConfig,
    system: SystemId,
    seed: u64,
    rules: &RuleSet,
    q: Option<QTable>,
) -> Result<RunArtifacts, HarnessError> {
    let wrap = |source: RunError| HarnessError::Run { system, seed, source };
    match system {
        SystemId::Autoguard => {
            let (trained, q) = match q {
                Some(q) => (None, q),
                None => {
                    let t = train_agent(cfg, seed).map_err(wrap)?;
                    let q = t.q.clone();
                    (Some(t), q)
                }
            };
            let mut run = evaluate_run(cfg, system, seed, Some(&q), rules, None).map_err(wrap)?;
            if let Some(t) = &trained {
                let curve: Vec<f64> = t.curve.iter().map(|p| p.total_reward).collect();
                run.metrics.pct = super::metrics::policy_convergence(&curve, super::metrics::PCT_WINDOW, super::metrics::PCT_BAND);
            }
            run.trained = trained.or(Some(TrainedAgent { q, curve: Vec::new() }));
            Ok(run)
        }
        SystemId::StaticIds => evaluate_run(cfg, system, seed, None, rules, None).map_err(wrap),
        SystemId::Tadm => {
            let model = fit_tadm(cfg, seed).map_err(wrap)?;
            evaluate_run(cfg, system, seed, None, rules, Some(&model)).map_err(wrap)
        }
    }
}

/// Runs every (seed, system) pair, in parallel when the configuration asks
/// for it, and aggregates one report per system in `cfg.systems` order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment, HarnessError> {
    cfg.validate()?;
    let rules = load_rules(cfg)?;
    let jobs: Vec<(u64, SystemId)> = cfg
        .seeds
        .iter()
        .flat_map(|s| cfg.systems.iter().map(move |sys| (*s, *sys)))
        .collect();
    let results = cfg.execution.map(jobs, |(seed, system)| run_one(cfg, system, seed, &rules, None));
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Experiment {
        reports: reports_for(cfg, &runs),
        runs,
    })
}

pub fn reports_for(cfg: &ExperimentConfig, runs: &[RunArtifacts]) -> Vec<MetricsReport> {
    let digest = cfg.digest();
    cfg.systems
        .iter()
        .map(|sys| {
            let mine: Vec<&RunArtifacts> = runs.iter().filter(|r| r.system == *sys).collect();
            let rec: Vec<Recovery> = mine.iter().flat_map(|r| r.recoveries.iter().copied()).collect();
            aggregate(*sys, mine.iter().map(|r| r.seed_row()).collect(), &rec, &digest)
        })
        .collect()
}
