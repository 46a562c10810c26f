use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::types::{ActionId, AttackKind, StageId};
use crate::error::ConfigError;

/// Static description of one simulated pipeline and its attack workload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub num_services: usize,
    /// Number of decision steps per episode.
    pub episode_length: u64,
    pub stage_sequence: Vec<StageId>,
    /// Steps spent in each stage before moving to the next one (cyclic).
    pub stage_dwell: u64,
    pub attack_schedule: AttackSchedule,
    pub rng_seed: u64,
    pub action_effects: ActionEffectTable,
    pub dynamics: Dynamics,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            num_services: 5,
            episode_length: 300,
            stage_sequence: StageId::ALL.to_vec(),
            stage_dwell: 50,
            attack_schedule: AttackSchedule::Random(RandomArrivals::default()),
            rng_seed: 0,
            action_effects: ActionEffectTable::default(),
            dynamics: Dynamics::default(),
        }
    }
}

impl PipelineConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        PipelineConfig {
            rng_seed: seed,
            ..self.clone()
        }
    }

    /// Same pipeline with no attacks at all.
    pub fn benign(&self) -> Self {
        PipelineConfig {
            attack_schedule: AttackSchedule::Fixed(Vec::new()),
            ..self.clone()
        }
    }

    pub fn stage_at(&self, step: u64) -> StageId {
        let slot = (step / self.stage_dwell) as usize % self.stage_sequence.len();
        self.stage_sequence[slot]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_services == 0 {
            return Err(ConfigError::new("num_services", "must be at least 1"));
        }
        if self.episode_length == 0 {
            return Err(ConfigError::new("episode_length", "must be at least 1"));
        }
        if self.stage_sequence.is_empty() {
            return Err(ConfigError::new("stage_sequence", "must not be empty"));
        }
        if self.stage_dwell == 0 {
            return Err(ConfigError::new("stage_dwell", "must be at least 1"));
        }
        match &self.attack_schedule {
            AttackSchedule::Fixed(attacks) => {
                for (i, a) in attacks.iter().enumerate() {
                    if a.step == 0 || a.step >= self.episode_length {
                        return Err(ConfigError::new(
                            format!("attack_schedule[{i}].step"),
                            format!(
                                "is {}, must lie in 1..{} (episode_length)",
                                a.step, self.episode_length
                            ),
                        ));
                    }
                    if let Some(t) = a.target_service {
                        if t >= self.num_services {
                            return Err(ConfigError::new(
                                format!("attack_schedule[{i}].target_service"),
                                format!("is {t}, pipeline has {} services", self.num_services),
                            ));
                        }
                    }
                    if a.duration_cap == Some(0) {
                        return Err(ConfigError::new(
                            format!("attack_schedule[{i}].duration_cap"),
                            "must be at least 1",
                        ));
                    }
                }
            }
            AttackSchedule::Random(r) => {
                if r.attacks_per_episode > 0 && r.kinds.is_empty() {
                    return Err(ConfigError::new(
                        "attack_schedule.kinds",
                        "must list at least one attack kind",
                    ));
                }
                if r.earliest_onset == 0 || r.earliest_onset > r.latest_onset {
                    return Err(ConfigError::new(
                        "attack_schedule.earliest_onset",
                        "must satisfy 1 <= earliest_onset <= latest_onset",
                    ));
                }
                if r.latest_onset >= self.episode_length {
                    return Err(ConfigError::new(
                        "attack_schedule.latest_onset",
                        format!(
                            "is {}, must be below episode_length {}",
                            r.latest_onset, self.episode_length
                        ),
                    ));
                }
            }
        }
        self.action_effects.validate()?;
        self.dynamics.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackSchedule {
    /// Explicit attack list.
    Fixed(Vec<ScheduledAttack>),
    /// A fixed number of attacks per episode with seeded kinds, onsets and
    /// targets.
    Random(RandomArrivals),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledAttack {
    pub step: u64,
    pub kind: AttackKind,
    #[serde(default)]
    pub target_service: Option<usize>,
    #[serde(default)]
    pub duration_cap: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomArrivals {
    pub attacks_per_episode: usize,
    pub kinds: Vec<AttackKind>,
    pub earliest_onset: u64,
    pub latest_onset: u64,
}

impl Default for RandomArrivals {
    fn default() -> Self {
        RandomArrivals {
            attacks_per_episode: 8,
            kinds: AttackKind::ALL.to_vec(),
            earliest_onset: 10,
            latest_onset: 250,
        }
    }
}

/// Cost side of an action, independent of any attack.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectCost {
    pub disruption_cost: f64,
    pub uptime_penalty: f64,
}

/// Outcome model for one (attack kind, action) pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionEffect {
    pub success_prob: f64,
    pub disruption_cost: f64,
    pub uptime_penalty: f64,
}

/// Hidden dynamics the agent has to learn: per (attack kind, action) success
/// probability and cost, plus the cost of each action when no attack is
/// active.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EffectTableRepr", into = "EffectTableRepr")]
pub struct ActionEffectTable {
    baseline: [EffectCost; ActionId::COUNT],
    effects: [[ActionEffect; ActionId::COUNT]; 6],
}

impl ActionEffectTable {
    pub fn effect(&self, kind: AttackKind, action: ActionId) -> ActionEffect {
        self.effects[kind.index()][action.index()]
    }

    pub fn baseline(&self, action: ActionId) -> EffectCost {
        self.baseline[action.index()]
    }

    pub fn set_effect(&mut self, kind: AttackKind, action: ActionId, effect: ActionEffect) {
        self.effects[kind.index()][action.index()] = effect;
    }

    pub fn set_baseline(&mut self, action: ActionId, cost: EffectCost) {
        self.baseline[action.index()] = cost;
    }

    /// Best success probability any action has against `kind`.
    pub fn best_action(&self, kind: AttackKind) -> (ActionId, f64) {
        ActionId::ALL
            .iter()
            .map(|&a| (a, self.effect(kind, a).success_prob))
            .fold((ActionId::NoOp, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for a in ActionId::ALL {
            let b = self.baseline(a);
            check_cost(&format!("action_effects.baseline[{a}]"), b.disruption_cost, b.uptime_penalty)?;
            for k in AttackKind::ALL {
                let e = self.effect(k, a);
                let field = format!("action_effects[{k}][{a}]");
                if !(0.0..=1.0).contains(&e.success_prob) {
                    return Err(ConfigError::new(
                        format!("{field}.success_prob"),
                        format!("is {}, must lie in [0, 1]", e.success_prob),
                    ));
                }
                check_cost(&field, e.disruption_cost, e.uptime_penalty)?;
            }
        }
        Ok(())
    }
}

fn check_cost(field: &str, cost: f64, penalty: f64) -> Result<(), ConfigError> {
    if !(cost.is_finite() && cost >= 0.0) {
        return Err(ConfigError::new(
            format!("{field}.disruption_cost"),
            format!("is {cost}, must be finite and >= 0"),
        ));
    }
    if !(penalty.is_finite() && (0.0..=1.0).contains(&penalty)) {
        return Err(ConfigError::new(
            format!("{field}.uptime_penalty"),
            format!("is {penalty}, must lie in [0, 1]"),
        ));
    }
    Ok(())
}

impl Default for ActionEffectTable {
    fn default() -> Self {
        use ActionId::*;
        // (disruption cost, uptime penalty) per action
        let costs: [(ActionId, f64, f64); 8] = [
            (NoOp, 0.0, 0.0),
            (IsolateContainer, 0.6, 0.15),
            (RollbackDeployment, 0.5, 0.10),
            (QuarantineImage, 0.4, 0.08),
            (ScaleDownReplicas, 0.2, 0.12),
            (RestartService, 0.3, 0.10),
            (BlockNetworkPolicy, 0.2, 0.05),
            (TriggerScan, 0.1, 0.0),
        ];
        // success probability, columns in ActionId order
        let success: [[f64; 8]; 6] = [
            // NO_OP ISO   RB    QI    SD    RS    BNP   SCAN
            [0.0, 0.30, 0.90, 0.80, 0.10, 0.15, 0.10, 0.05], // dependency poisoning
            [0.0, 0.90, 0.20, 0.40, 0.50, 0.25, 0.50, 0.00], // container escape
            [0.0, 0.55, 0.10, 0.10, 0.20, 0.20, 0.92, 0.00], // credential exfiltration
            [0.0, 0.75, 0.20, 0.60, 0.70, 0.45, 0.20, 0.00], // cryptominer
            [0.0, 0.20, 0.92, 0.30, 0.10, 0.35, 0.10, 0.05], // config tampering
            [0.0, 0.70, 0.40, 0.30, 0.40, 0.20, 0.60, 0.05], // zero-day variant
        ];
        let mut baseline = [EffectCost {
            disruption_cost: 0.0,
            uptime_penalty: 0.0,
        }; ActionId::COUNT];
        for (a, c, p) in costs {
            baseline[a.index()] = EffectCost {
                disruption_cost: c,
                uptime_penalty: p,
            };
        }
        let mut effects = [[ActionEffect {
            success_prob: 0.0,
            disruption_cost: 0.0,
            uptime_penalty: 0.0,
        }; ActionId::COUNT]; 6];
        for (k, row) in success.iter().enumerate() {
            for (a, &p) in row.iter().enumerate() {
                effects[k][a] = ActionEffect {
                    success_prob: p,
                    disruption_cost: baseline[a].disruption_cost,
                    uptime_penalty: baseline[a].uptime_penalty,
                };
            }
        }
        ActionEffectTable { baseline, effects }
    }
}

#[derive(Serialize, Deserialize)]
struct BaselineEntry {
    action: ActionId,
    disruption_cost: f64,
    uptime_penalty: f64,
}

#[derive(Serialize, Deserialize)]
struct EffectEntry {
    scenario: AttackKind,
    action: ActionId,
    success_prob: f64,
    disruption_cost: f64,
    uptime_penalty: f64,
}

#[derive(Serialize, Deserialize)]
struct EffectTableRepr {
    baseline: Vec<BaselineEntry>,
    entries: Vec<EffectEntry>,
}

impl TryFrom<EffectTableRepr> for ActionEffectTable {
    type Error = String;

    fn try_from(repr: EffectTableRepr) -> Result<Self, String> {
        let mut table = ActionEffectTable::default();
        let mut seen_base = BTreeSet::new();
        for b in repr.baseline {
            if !seen_base.insert(b.action) {
                return Err(format!("duplicate baseline entry for {}", b.action));
            }
            table.set_baseline(
                b.action,
                EffectCost {
                    disruption_cost: b.disruption_cost,
                    uptime_penalty: b.uptime_penalty,
                },
            );
        }
        let mut seen = BTreeSet::new();
        for e in repr.entries {
            if !seen.insert((e.scenario, e.action)) {
                return Err(format!("duplicate effect entry for ({}, {})", e.scenario, e.action));
            }
            table.set_effect(
                e.scenario,
                e.action,
                ActionEffect {
                    success_prob: e.success_prob,
                    disruption_cost: e.disruption_cost,
                    uptime_penalty: e.uptime_penalty,
                },
            );
        }
        if let Some(a) = ActionId::ALL.iter().find(|a| !seen_base.contains(a)) {
            return Err(format!("missing baseline entry for {a}"));
        }
        for k in AttackKind::ALL {
            for a in ActionId::ALL {
                if !seen.contains(&(k, a)) {
                    return Err(format!("missing effect entry for ({k}, {a})"));
                }
            }
        }
        Ok(table)
    }
}

impl From<ActionEffectTable> for EffectTableRepr {
    fn from(t: ActionEffectTable) -> Self {
        let t = &t;
        EffectTableRepr {
            baseline: ActionId::ALL
                .iter()
                .map(|&a| BaselineEntry {
                    action: a,
                    disruption_cost: t.baseline(a).disruption_cost,
                    uptime_penalty: t.baseline(a).uptime_penalty,
                })
                .collect(),
            entries: AttackKind::ALL
                .iter()
                .flat_map(|&k| {
                    ActionId::ALL.iter().map(move |&a| {
                        let e = t.effect(k, a);
                        EffectEntry {
                            scenario: k,
                            action: a,
                            success_prob: e.success_prob,
                            disruption_cost: e.disruption_cost,
                            uptime_penalty: e.uptime_penalty,
                        }
                    })
                })
                .collect(),
        }
    }
}

/// Background traffic and health dynamics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dynamics {
    pub benign_logs_per_step: usize,
    pub benign_metrics_per_step: usize,
    pub benign_network_per_step: usize,
    /// Upper bound of ordinary metric sample magnitudes.
    pub benign_metric_max: f64,
    pub benign_metric_spike_prob: f64,
    pub benign_metric_spike_range: (f64, f64),
    pub benign_scan_prob: f64,
    pub benign_scan_max: f64,
    /// Probability per step of a harmless log line that happens to carry a
    /// known attack signature (a penetration test, a noisy tool).
    pub benign_signature_prob: f64,
    pub benign_signature_max: f64,
    pub load_noise: f64,
    pub benign_drift_max: f64,
    /// Probability that an active attack is visible in a given step after
    /// its onset step (the onset step always emits).
    pub attack_emit_prob: f64,
    pub attack_log_range: (f64, f64),
    pub default_duration_cap: u64,
    pub recovery_rate: f64,
    pub attack_health_floor: f64,
    pub load_decay: f64,
    pub transient_decay: f64,
    pub drift_decay: f64,
    pub initial_version: u64,
    pub replicas: u32,
}

impl Default for Dynamics {
    fn default() -> Self {
        Dynamics {
            benign_logs_per_step: 2,
            benign_metrics_per_step: 2,
            benign_network_per_step: 1,
            benign_metric_max: 1.0,
            benign_metric_spike_prob: 0.03,
            benign_metric_spike_range: (1.2, 2.5),
            benign_scan_prob: 0.10,
            benign_scan_max: 1.0,
            benign_signature_prob: 0.12,
            benign_signature_max: 0.5,
            load_noise: 0.05,
            benign_drift_max: 0.02,
            attack_emit_prob: 0.3,
            attack_log_range: (0.5, 1.5),
            default_duration_cap: 45,
            recovery_rate: 0.05,
            attack_health_floor: 0.1,
            load_decay: 0.6,
            transient_decay: 0.5,
            drift_decay: 0.9,
            initial_version: 20,
            replicas: 3,
        }
    }
}

impl Dynamics {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let probs = [
            ("dynamics.benign_metric_spike_prob", self.benign_metric_spike_prob),
            ("dynamics.benign_scan_prob", self.benign_scan_prob),
            ("dynamics.benign_signature_prob", self.benign_signature_prob),
            ("dynamics.attack_emit_prob", self.attack_emit_prob),
            ("dynamics.recovery_rate", self.recovery_rate),
            ("dynamics.attack_health_floor", self.attack_health_floor),
            ("dynamics.load_decay", self.load_decay),
            ("dynamics.transient_decay", self.transient_decay),
            ("dynamics.drift_decay", self.drift_decay),
        ];
        for (field, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::new(field, format!("is {p}, must lie in [0, 1]")));
            }
        }
        let ranges = [
            ("dynamics.benign_metric_spike_range", self.benign_metric_spike_range),
            ("dynamics.attack_log_range", self.attack_log_range),
        ];
        for (field, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(ConfigError::new(field, "must satisfy 0 <= lo <= hi"));
            }
        }
        let nonneg = [
            ("dynamics.benign_metric_max", self.benign_metric_max),
            ("dynamics.benign_scan_max", self.benign_scan_max),
            ("dynamics.benign_signature_max", self.benign_signature_max),
            ("dynamics.load_noise", self.load_noise),
            ("dynamics.benign_drift_max", self.benign_drift_max),
        ];
        for (field, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::new(field, format!("is {v}, must be finite and >= 0")));
            }
        }
        if self.default_duration_cap == 0 {
            return Err(ConfigError::new("dynamics.default_duration_cap", "must be at least 1"));
        }
        Ok(())
    }
}
