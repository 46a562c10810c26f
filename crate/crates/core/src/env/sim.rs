use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{AttackSchedule, PipelineConfig};
use super::types::*;
use crate::error::EnvError;
use crate::rng::{stream, Domain};

/// Raw outcome facts of one transition. Reward shaping happens elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFacts {
    pub action: ActionId,
    pub target: usize,
    pub cleared: Vec<IncidentId>,
    pub timed_out: Vec<IncidentId>,
    pub started: Vec<IncidentId>,
    pub disruption_cost: f64,
    pub uptime_before: f64,
    pub uptime_after: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub events: EventBatch,
    pub done: bool,
    pub facts: StepFacts,
}

/// Handle on the remediation knobs of a running environment.
pub struct ControlPlane<'a> {
    pub controls: &'a mut [ServiceControls],
    pub deployed_version: &'a mut u64,
}

/// Discrete-time simulation of one pipeline episode.
///
/// All randomness is drawn from streams keyed by `(rng_seed, purpose, step)`
/// so background traffic does not depend on the actions taken, and two
/// environments built from the same config evolve identically under the
/// same actions.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineEnv {
    #[serde(skip)]
    config: PipelineConfig,
    state: EnvState,
    schedule: Vec<AttackScenario>,
    next_pending: usize,
    residual_cpu: f64,
    residual_mem: f64,
    transient_cpu: f64,
    transient_mem: f64,
    incidents: Vec<IncidentRecord>,
    labels: Vec<GroundTruth>,
    done: bool,
}

struct Traffic {
    noise_cpu: f64,
    noise_mem: f64,
    drift: f64,
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Builds the environment and the step-0 observation.
pub fn reset(config: PipelineConfig) -> Result<(PipelineEnv, EventBatch), EnvError> {
    config.validate()?;
    let schedule = build_schedule(&config);
    let d = &config.dynamics;
    let n = config.num_services;
    let state = EnvState {
        step: 0,
        uptime: 1.0,
        stage: config.stage_at(0),
        service_health: vec![1.0; n],
        cpu: 0.0,
        mem: 0.0,
        dependency_drift: 0.0,
        active_attacks: Vec::new(),
        deployed_version: d.initial_version,
        controls: vec![ServiceControls::provisioned(d.replicas); n],
    };
    let mut env = PipelineEnv {
        config,
        state,
        schedule,
        next_pending: 0,
        residual_cpu: 0.0,
        residual_mem: 0.0,
        transient_cpu: 0.0,
        transient_mem: 0.0,
        incidents: Vec::new(),
        labels: Vec::new(),
        done: false,
    };
    let mut batch = EventBatch::new();
    let traffic = env.benign_traffic(0, &mut batch);
    env.state.dependency_drift = if env.state.stage == StageId::Build {
        traffic.drift
    } else {
        0.0
    };
    env.refresh_load(&traffic);
    env.labels.push(env.state.label());
    Ok((env, batch))
}

fn build_schedule(config: &PipelineConfig) -> Vec<AttackScenario> {
    let d = &config.dynamics;
    let mut raw: Vec<(u64, AttackKind, usize, u64)> = match &config.attack_schedule {
        AttackSchedule::Fixed(list) => list
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let target = a.target_service.unwrap_or_else(|| {
                    stream(config.rng_seed, Domain::Schedule, &[i as u64])
                        .gen_range(0..config.num_services)
                });
                (a.step, a.kind, target, a.duration_cap.unwrap_or(d.default_duration_cap))
            })
            .collect(),
        AttackSchedule::Random(r) => {
            let mut rng = stream(config.rng_seed, Domain::Schedule, &[u64::MAX]);
            (0..r.attacks_per_episode)
                .map(|_| {
                    let kind = *r.kinds.choose(&mut rng).expect("validated non-empty");
                    let onset = rng.gen_range(r.earliest_onset..=r.latest_onset);
                    let target = rng.gen_range(0..config.num_services);
                    (onset, kind, target, d.default_duration_cap)
                })
                .collect()
        }
    };
    raw.sort_by_key(|&(onset, ..)| onset);
    raw.into_iter()
        .enumerate()
        .map(|(i, (onset, kind, target, cap))| AttackScenario {
            id: i as IncidentId,
            kind,
            signature_ids: kind.signature_ids(),
            onset_step: onset,
            duration_cap: cap,
            target_service: target,
        })
        .collect()
}

impl PipelineEnv {
    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Every attack this episode will see, in onset order.
    pub fn schedule(&self) -> &[AttackScenario] {
        &self.schedule
    }

    /// Incidents that have started so far.
    pub fn incidents(&self) -> &[IncidentRecord] {
        &self.incidents
    }

    /// One label per decision window seen so far: `MALICIOUS` exactly on the
    /// steps during which at least one attack was active.
    pub fn ground_truth_log(&self) -> Vec<(u64, GroundTruth)> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (i as u64, l))
            .collect()
    }

    pub fn control_plane(&mut self) -> ControlPlane<'_> {
        ControlPlane {
            controls: &mut self.state.controls,
            deployed_version: &mut self.state.deployed_version,
        }
    }

    /// SHA-256 over the complete simulator state, including hidden dynamics.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("environment state serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Advances one step, aiming `action` at the default target.
    pub fn step(&mut self, action: ActionId) -> Result<StepOutcome, EnvError> {
        let target = self.state.default_target();
        self.step_targeted(action, target)
    }

    pub fn step_targeted(&mut self, action: ActionId, target: usize) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone(self.state.step));
        }
        let n = self.config.num_services;
        if target >= n {
            return Err(EnvError::NoSuchService { index: target, count: n });
        }
        let t = self.state.step;
        let new_t = t + 1;
        let uptime_before = self.state.uptime;
        let d = self.config.dynamics.clone();

        self.transient_cpu *= d.transient_decay;
        self.transient_mem *= d.transient_decay;

        let mut cleared = Vec::new();
        let mut disruption_cost = 0.0;
        if action != ActionId::NoOp {
            let table = &self.config.action_effects;
            let (cost, penalty) = match self.state.strongest_attack() {
                Some(a) => {
                    let e = table.effect(a.kind, action);
                    (e.disruption_cost, e.uptime_penalty)
                }
                None => {
                    let b = table.baseline(action);
                    (b.disruption_cost, b.uptime_penalty)
                }
            };
            disruption_cost = cost;
            let mut rng = stream(self.config.rng_seed, Domain::Action, &[t]);
            for attack in &self.state.active_attacks {
                let u: f64 = rng.gen();
                let applies =
                    attack.target_service == target || action == ActionId::RollbackDeployment;
                if applies && u < table.effect(attack.kind, action).success_prob {
                    cleared.push(attack.id);
                }
            }
            // Disruption alone never takes a service below the attack floor.
            let h = &mut self.state.service_health[target];
            *h = (*h - penalty).max(d.attack_health_floor.min(*h));
            let (dc, dm) = action.transient();
            self.transient_cpu += dc;
            self.transient_mem += dm;
            if action == ActionId::RollbackDeployment {
                self.state.dependency_drift = 0.0;
            }
        }
        self.end_attacks(&cleared, IncidentEnd::Remediated { step: new_t });

        let timed_out: Vec<IncidentId> = self
            .state
            .active_attacks
            .iter()
            .filter(|a| new_t - a.onset_step >= a.duration_cap)
            .map(|a| a.id)
            .collect();
        self.end_attacks(&timed_out, IncidentEnd::TimedOut { step: new_t });

        let mut started = Vec::new();
        while let Some(next) = self.schedule.get(self.next_pending) {
            if next.onset_step > new_t {
                break;
            }
            if next.onset_step == new_t {
                started.push(next.id);
                self.incidents.push(IncidentRecord {
                    id: next.id,
                    kind: next.kind,
                    target_service: next.target_service,
                    onset_step: next.onset_step,
                    duration_cap: next.duration_cap,
                    end: IncidentEnd::Unresolved,
                });
                self.state.active_attacks.push(next.clone());
            }
            self.next_pending += 1;
        }

        let mut attacked = vec![false; n];
        for a in &self.state.active_attacks {
            attacked[a.target_service] = true;
            let h = &mut self.state.service_health[a.target_service];
            if *h > d.attack_health_floor {
                *h = (*h - a.kind.profile().degrade).max(d.attack_health_floor);
            }
        }
        for (i, h) in self.state.service_health.iter_mut().enumerate() {
            let disrupted = action != ActionId::NoOp && i == target;
            if !attacked[i] && !disrupted {
                *h = (*h + d.recovery_rate).min(1.0);
            }
        }

        let previous_stage = self.state.stage;
        self.state.step = new_t;
        self.state.stage = self.config.stage_at(new_t);
        if self.state.stage == StageId::Deploy && previous_stage != StageId::Deploy {
            self.state.deployed_version += 1;
        }

        let mut batch = EventBatch::new();
        let traffic = self.benign_traffic(new_t, &mut batch);
        let mut drift = self.state.dependency_drift * d.drift_decay;
        if self.state.stage == StageId::Build {
            drift += traffic.drift;
        }
        for a in &self.state.active_attacks {
            drift += a.kind.profile().drift_rate;
        }
        self.state.dependency_drift = drift;
        self.residual_cpu *= d.load_decay;
        self.residual_mem *= d.load_decay;
        self.refresh_load(&traffic);

        for a in &self.state.active_attacks {
            emit_attack(self.config.rng_seed, &d, a, new_t, &mut batch);
        }

        let done = new_t == self.config.episode_length;
        if done {
            self.done = true;
        } else {
            self.labels.push(self.state.label());
        }
        Ok(StepOutcome {
            events: batch,
            done,
            facts: StepFacts {
                action,
                target,
                cleared,
                timed_out,
                started,
                disruption_cost,
                uptime_before,
                uptime_after: self.state.uptime,
            },
        })
    }

    fn end_attacks(&mut self, ids: &[IncidentId], end: IncidentEnd) {
        if ids.is_empty() {
            return;
        }
        let mut kept = Vec::with_capacity(self.state.active_attacks.len());
        for a in self.state.active_attacks.drain(..) {
            if ids.contains(&a.id) {
                let p = a.kind.profile();
                self.residual_cpu += p.cpu_load;
                self.residual_mem += p.mem_load;
                if let Some(rec) = self.incidents.iter_mut().find(|r| r.id == a.id) {
                    rec.end = end;
                }
            } else {
                kept.push(a);
            }
        }
        self.state.active_attacks = kept;
    }

    fn refresh_load(&mut self, traffic: &Traffic) {
        let (base_cpu, base_mem) = self.state.stage.base_load();
        let (attack_cpu, attack_mem) = self
            .state
            .active_attacks
            .iter()
            .map(|a| (a.kind.profile().cpu_load, a.kind.profile().mem_load))
            .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        self.state.cpu = (base_cpu
            + traffic.noise_cpu
            + attack_cpu
            + self.residual_cpu
            + self.transient_cpu)
            .clamp(0.0, 1.0);
        self.state.mem = (base_mem
            + traffic.noise_mem
            + attack_mem
            + self.residual_mem
            + self.transient_mem)
            .clamp(0.0, 1.0);
        let n = self.state.service_health.len() as f64;
        self.state.uptime = (self.state.service_health.iter().sum::<f64>() / n).clamp(0.0, 1.0);
    }

    /// Background events for `step`. Draws the same amount of randomness at
    /// every step so the benign stream is a pure function of (seed, step).
    fn benign_traffic(&self, step: u64, batch: &mut EventBatch) -> Traffic {
        let d = &self.config.dynamics;
        let mut rng = stream(self.config.rng_seed, Domain::Traffic, &[step]);
        let traffic = Traffic {
            noise_cpu: uniform(&mut rng, -d.load_noise, d.load_noise),
            noise_mem: uniform(&mut rng, -d.load_noise, d.load_noise),
            drift: uniform(&mut rng, 0.0, d.benign_drift_max),
        };
        let benign = GroundTruth::Benign;
        for _ in 0..d.benign_logs_per_step {
            let magnitude = rng.gen::<f64>();
            batch.push(event(step, EventSource::Log, None, magnitude), benign);
        }
        let spike_slot = (rng.gen::<f64>() < d.benign_metric_spike_prob)
            .then(|| rng.gen_range(0..d.benign_metrics_per_step.max(1)));
        let (spike_lo, spike_hi) = d.benign_metric_spike_range;
        for i in 0..d.benign_metrics_per_step {
            let magnitude = if spike_slot == Some(i) {
                uniform(&mut rng, spike_lo, spike_hi)
            } else {
                uniform(&mut rng, 0.0, d.benign_metric_max)
            };
            batch.push(event(step, EventSource::Metric, None, magnitude), benign);
        }
        for _ in 0..d.benign_network_per_step {
            let magnitude = rng.gen::<f64>();
            batch.push(event(step, EventSource::Network, None, magnitude), benign);
        }
        if rng.gen::<f64>() < d.benign_scan_prob {
            let magnitude = uniform(&mut rng, 0.0, d.benign_scan_max);
            batch.push(event(step, EventSource::Scanner, None, magnitude), benign);
        }
        if rng.gen::<f64>() < d.benign_signature_prob {
            let known = AttackKind::known_signatures();
            let sig = *known.choose(&mut rng).expect("catalog non-empty");
            let magnitude = uniform(&mut rng, 0.1, d.benign_signature_max.max(0.1));
            batch.push(event(step, EventSource::Log, Some(sig), magnitude), benign);
        }
        traffic
    }
}

fn event(step: u64, source: EventSource, signature_id: Option<SignatureId>, magnitude: f64) -> TelemetryEvent {
    TelemetryEvent {
        step,
        source,
        signature_id,
        magnitude,
    }
}

fn emit_attack(
    seed: u64,
    d: &super::config::Dynamics,
    attack: &AttackScenario,
    step: u64,
    batch: &mut EventBatch,
) {
    let mut rng = stream(seed, Domain::Emission, &[attack.id as u64, step]);
    let visible = rng.gen::<f64>() < d.attack_emit_prob;
    if step != attack.onset_step && !visible {
        return;
    }
    let truth = GroundTruth::Malicious(attack.kind);
    let profile = attack.kind.profile();
    let sigs = &attack.signature_ids;
    let logs = 1 + usize::from(rng.gen::<bool>()) + profile.extra_logs;
    let (log_lo, log_hi) = d.attack_log_range;
    for _ in 0..logs {
        let sig = *sigs.choose(&mut rng).expect("scenario has signatures");
        let magnitude = uniform(&mut rng, log_lo, log_hi);
        batch.push(event(step, EventSource::Log, Some(sig), magnitude), truth);
    }
    if let Some((lo, hi)) = profile.scanner {
        let sig = *sigs.choose(&mut rng).expect("scenario has signatures");
        let magnitude = uniform(&mut rng, lo, hi);
        batch.push(event(step, EventSource::Scanner, Some(sig), magnitude), truth);
    }
    if let Some((lo, hi)) = profile.network {
        let sig = *sigs.choose(&mut rng).expect("scenario has signatures");
        let magnitude = uniform(&mut rng, lo, hi);
        batch.push(event(step, EventSource::Network, Some(sig), magnitude), truth);
    }
    let (lo, hi) = profile.metric_range;
    for _ in 0..profile.metric_spikes {
        let magnitude = uniform(&mut rng, lo, hi);
        batch.push(event(step, EventSource::Metric, None, magnitude), truth);
    }
}
