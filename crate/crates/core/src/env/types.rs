use std::fmt;

use serde::{Deserialize, Serialize};

/// Pipeline stage the simulated CI/CD system is currently in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StageId {
    Commit,
    Build,
    Test,
    Scan,
    Deploy,
    Operate,
}

impl StageId {
    pub const ALL: [StageId; 6] = [
        StageId::Commit,
        StageId::Build,
        StageId::Test,
        StageId::Scan,
        StageId::Deploy,
        StageId::Operate,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<StageId> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            StageId::Commit => "COMMIT",
            StageId::Build => "BUILD",
            StageId::Test => "TEST",
            StageId::Scan => "SCAN",
            StageId::Deploy => "DEPLOY",
            StageId::Operate => "OPERATE",
        }
    }

    /// Baseline (cpu, mem) utilisation of the pipeline while in this stage.
    pub(crate) fn base_load(self) -> (f64, f64) {
        match self {
            StageId::Commit => (0.15, 0.25),
            StageId::Build => (0.55, 0.45),
            StageId::Test => (0.45, 0.40),
            StageId::Scan => (0.35, 0.35),
            StageId::Deploy => (0.30, 0.45),
            StageId::Operate => (0.40, 0.40),
        }
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Identifier carried by telemetry that matched a known pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignatureId(pub u32);

impl fmt::Display for SignatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Signatures per known attack kind.
pub const SIGNATURES_PER_KIND: u32 = 8;
/// First id of the block reserved for zero-day variants. No rule set built
/// by this crate ever covers ids at or above this value.
pub const ZERO_DAY_RANGE_START: u32 = 9000;
pub const ZERO_DAY_SIGNATURES: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AttackKind {
    DependencyPoisoning,
    ContainerEscape,
    CredentialExfiltration,
    Cryptominer,
    ConfigTampering,
    ZeroDayVariant,
}

impl AttackKind {
    pub const ALL: [AttackKind; 6] = [
        AttackKind::DependencyPoisoning,
        AttackKind::ContainerEscape,
        AttackKind::CredentialExfiltration,
        AttackKind::Cryptominer,
        AttackKind::ConfigTampering,
        AttackKind::ZeroDayVariant,
    ];

    pub const KNOWN: [AttackKind; 5] = [
        AttackKind::DependencyPoisoning,
        AttackKind::ContainerEscape,
        AttackKind::CredentialExfiltration,
        AttackKind::Cryptominer,
        AttackKind::ConfigTampering,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_zero_day(self) -> bool {
        self == AttackKind::ZeroDayVariant
    }

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::DependencyPoisoning => "DEPENDENCY_POISONING",
            AttackKind::ContainerEscape => "CONTAINER_ESCAPE",
            AttackKind::CredentialExfiltration => "CREDENTIAL_EXFILTRATION",
            AttackKind::Cryptominer => "CRYPTOMINER",
            AttackKind::ConfigTampering => "CONFIG_TAMPERING",
            AttackKind::ZeroDayVariant => "ZERO_DAY_VARIANT",
        }
    }

    /// Signature ids this kind emits while active.
    pub fn signature_ids(self) -> Vec<SignatureId> {
        if self.is_zero_day() {
            (0..ZERO_DAY_SIGNATURES)
                .map(|j| SignatureId(ZERO_DAY_RANGE_START + j))
                .collect()
        } else {
            let base = 1000 + 100 * self.index() as u32;
            (0..SIGNATURES_PER_KIND).map(|j| SignatureId(base + j)).collect()
        }
    }

    /// Every signature of every non-zero-day kind.
    pub fn known_signatures() -> Vec<SignatureId> {
        Self::KNOWN.iter().flat_map(|k| k.signature_ids()).collect()
    }

    pub(crate) fn profile(self) -> &'static AttackProfile {
        &PROFILES[self.index()]
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How an active attack shows up in telemetry and in the system's state.
#[derive(Debug)]
pub(crate) struct AttackProfile {
    pub scanner: Option<(f64, f64)>,
    pub network: Option<(f64, f64)>,
    pub metric_spikes: usize,
    pub metric_range: (f64, f64),
    pub extra_logs: usize,
    pub cpu_load: f64,
    pub mem_load: f64,
    pub drift_rate: f64,
    /// Health lost per step by the targeted service; also the severity used
    /// to pick the strongest of several concurrent attacks.
    pub degrade: f64,
}

const PROFILES: [AttackProfile; 6] = [
    // DEPENDENCY_POISONING
    AttackProfile {
        scanner: Some((2.0, 4.0)),
        network: None,
        metric_spikes: 0,
        metric_range: (0.0, 0.0),
        extra_logs: 0,
        cpu_load: 0.0,
        mem_load: 0.0,
        drift_rate: 0.35,
        degrade: 0.03,
    },
    // CONTAINER_ESCAPE
    AttackProfile {
        scanner: None,
        network: Some((1.0, 2.0)),
        metric_spikes: 2,
        metric_range: (1.5, 3.0),
        extra_logs: 0,
        cpu_load: 0.05,
        mem_load: 0.4,
        drift_rate: 0.0,
        degrade: 0.06,
    },
    // CREDENTIAL_EXFILTRATION
    AttackProfile {
        scanner: None,
        network: Some((2.0, 4.0)),
        metric_spikes: 2,
        metric_range: (1.5, 3.0),
        extra_logs: 0,
        cpu_load: 0.0,
        mem_load: 0.0,
        drift_rate: 0.0,
        degrade: 0.04,
    },
    // CRYPTOMINER
    AttackProfile {
        scanner: None,
        network: None,
        metric_spikes: 2,
        metric_range: (2.0, 3.5),
        extra_logs: 0,
        cpu_load: 0.45,
        mem_load: 0.05,
        drift_rate: 0.0,
        degrade: 0.05,
    },
    // CONFIG_TAMPERING
    AttackProfile {
        scanner: Some((1.5, 3.0)),
        network: None,
        metric_spikes: 0,
        metric_range: (0.0, 0.0),
        extra_logs: 1,
        cpu_load: 0.0,
        mem_load: 0.0,
        drift_rate: 0.2,
        degrade: 0.04,
    },
    // ZERO_DAY_VARIANT
    AttackProfile {
        scanner: None,
        network: Some((1.0, 3.0)),
        metric_spikes: 2,
        metric_range: (1.5, 3.0),
        extra_logs: 0,
        cpu_load: 0.25,
        mem_load: 0.25,
        drift_rate: 0.0,
        degrade: 0.06,
    },
];

/// Remediation actions available to every responder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionId {
    NoOp,
    IsolateContainer,
    RollbackDeployment,
    QuarantineImage,
    ScaleDownReplicas,
    RestartService,
    BlockNetworkPolicy,
    TriggerScan,
}

impl ActionId {
    pub const COUNT: usize = 8;
    pub const ALL: [ActionId; 8] = [
        ActionId::NoOp,
        ActionId::IsolateContainer,
        ActionId::RollbackDeployment,
        ActionId::QuarantineImage,
        ActionId::ScaleDownReplicas,
        ActionId::RestartService,
        ActionId::BlockNetworkPolicy,
        ActionId::TriggerScan,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ActionId> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionId::NoOp => "NO_OP",
            ActionId::IsolateContainer => "ISOLATE_CONTAINER",
            ActionId::RollbackDeployment => "ROLLBACK_DEPLOYMENT",
            ActionId::QuarantineImage => "QUARANTINE_IMAGE",
            ActionId::ScaleDownReplicas => "SCALE_DOWN_REPLICAS",
            ActionId::RestartService => "RESTART_SERVICE",
            ActionId::BlockNetworkPolicy => "BLOCK_NETWORK_POLICY",
            ActionId::TriggerScan => "TRIGGER_SCAN",
        }
    }

    /// Short-lived (cpu, mem) swing caused by carrying out the action.
    pub(crate) fn transient(self) -> (f64, f64) {
        match self {
            ActionId::NoOp => (0.0, 0.0),
            ActionId::IsolateContainer => (-0.10, -0.15),
            ActionId::RollbackDeployment => (0.10, 0.05),
            ActionId::QuarantineImage => (0.05, -0.05),
            ActionId::ScaleDownReplicas => (-0.15, -0.10),
            ActionId::RestartService => (0.15, 0.05),
            ActionId::BlockNetworkPolicy => (0.0, 0.0),
            ActionId::TriggerScan => (0.10, 0.0),
        }
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventSource {
    Log,
    Metric,
    Scanner,
    Network,
}

/// Hidden label of an event or a decision window. Only the harness reads it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "label", content = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GroundTruth {
    Benign,
    Malicious(AttackKind),
}

impl GroundTruth {
    pub fn is_malicious(self) -> bool {
        matches!(self, GroundTruth::Malicious(_))
    }
}

/// One observable pipeline event. Field order matches the JSONL log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    pub step: u64,
    pub source: EventSource,
    pub signature_id: Option<SignatureId>,
    pub magnitude: f64,
}

/// Events emitted for one step, with their labels held apart so that
/// detectors can only ever be handed the observable half.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventBatch {
    events: Vec<TelemetryEvent>,
    truth: Vec<GroundTruth>,
}

impl EventBatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: TelemetryEvent, truth: GroundTruth) {
        self.events.push(event);
        self.truth.push(truth);
    }

    pub fn events(&self) -> &[TelemetryEvent] {
        &self.events
    }

    pub fn ground_truth(&self) -> &[GroundTruth] {
        &self.truth
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TelemetryEvent, GroundTruth)> {
        self.events.iter().zip(self.truth.iter().copied())
    }
}

pub type IncidentId = u32;

/// An attack instance: what it is, when it starts, and how long it may run
/// unremediated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub id: IncidentId,
    pub kind: AttackKind,
    pub signature_ids: Vec<SignatureId>,
    pub onset_step: u64,
    pub duration_cap: u64,
    pub target_service: usize,
}

impl AttackScenario {
    pub fn severity(&self) -> f64 {
        self.kind.profile().degrade
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NetworkPolicy {
    Open,
    Quarantined,
    DenyEgress,
}

/// Per-service knobs that remediation playbooks turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceControls {
    pub replicas: u32,
    pub network_policy: NetworkPolicy,
    pub image_quarantined: bool,
    pub restarts: u32,
    pub scans: u32,
}

impl ServiceControls {
    pub fn provisioned(replicas: u32) -> Self {
        ServiceControls {
            replicas,
            network_policy: NetworkPolicy::Open,
            image_quarantined: false,
            restarts: 0,
            scans: 0,
        }
    }
}

/// Full simulator state at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub step: u64,
    pub uptime: f64,
    pub stage: StageId,
    pub service_health: Vec<f64>,
    pub cpu: f64,
    pub mem: f64,
    pub dependency_drift: f64,
    pub active_attacks: Vec<AttackScenario>,
    pub deployed_version: u64,
    pub controls: Vec<ServiceControls>,
}

impl EnvState {
    /// The active attack with the highest severity; ties go to the earliest
    /// onset, then the lowest incident id.
    pub fn strongest_attack(&self) -> Option<&AttackScenario> {
        self.active_attacks.iter().min_by(|a, b| {
            b.severity()
                .total_cmp(&a.severity())
                .then(a.onset_step.cmp(&b.onset_step))
                .then(a.id.cmp(&b.id))
        })
    }

    /// Service a remediation is aimed at: the strongest attack's target, or
    /// the least healthy service when nothing is known to be active.
    pub fn default_target(&self) -> usize {
        if let Some(a) = self.strongest_attack() {
            return a.target_service;
        }
        self.service_health
            .iter()
            .enumerate()
            .min_by(|(i, a), (j, b)| a.total_cmp(b).then(i.cmp(j)))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn label(&self) -> GroundTruth {
        match self.strongest_attack() {
            Some(a) => GroundTruth::Malicious(a.kind),
            None => GroundTruth::Benign,
        }
    }

    pub fn is_attack_active(&self, id: IncidentId) -> bool {
        self.active_attacks.iter().any(|a| a.id == id)
    }
}

/// How an incident ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "end", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IncidentEnd {
    /// Cleared by a remediation at the transition into `step`.
    Remediated { step: u64 },
    /// Ran for its full duration cap and subsided on its own at `step`.
    TimedOut { step: u64 },
    /// Still active when the episode ended.
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub id: IncidentId,
    pub kind: AttackKind,
    pub target_service: usize,
    pub onset_step: u64,
    pub duration_cap: u64,
    pub end: IncidentEnd,
}
