use serde::{Deserialize, Serialize};

use crate::env::{ActionId, ControlPlane, EnvState, IncidentId, NetworkPolicy, ServiceControls};

/// Where a playbook is aimed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionParams {
    pub target_service: usize,
    /// Incident the action is meant to end, when one is known.
    pub incident: Option<IncidentId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlaybookStep {
    ApplyNetworkPolicy { service: usize, policy: NetworkPolicy },
    ScaleReplicas { service: usize, replicas: u32 },
    MarkImageQuarantined { service: usize },
    RestartService { service: usize },
    RollbackDeployment,
    TriggerScan { service: usize },
}

/// Restores what the forward steps changed, from the checkpoint taken just
/// before they ran.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RollbackStep {
    RestoreServiceControls { service: usize },
    RestoreDeployedVersion,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerifyCheck {
    /// True when the named incident is no longer active. `None` never holds.
    ScenarioCleared { incident: Option<IncidentId> },
    HealthAbove { service: usize, floor: f64 },
}

impl VerifyCheck {
    pub fn holds(&self, state: &EnvState) -> bool {
        match *self {
            VerifyCheck::ScenarioCleared { incident: Some(id) } => !state.is_attack_active(id),
            VerifyCheck::ScenarioCleared { incident: None } => false,
            VerifyCheck::HealthAbove { service, floor } => {
                state.service_health.get(service).is_some_and(|h| *h > floor)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Playbook {
    pub action: ActionId,
    pub params: ActionParams,
    pub steps: Vec<PlaybookStep>,
    pub verify_checks: Vec<VerifyCheck>,
    pub rollback_steps: Vec<RollbackStep>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlaybookError {
    #[error("NO_OP has no playbook")]
    NoOp,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{step:?} failed: {reason}")]
pub struct StepError {
    pub step: PlaybookStep,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{step:?} failed: {reason}")]
pub struct RollbackError {
    pub step: RollbackStep,
    pub reason: String,
}

pub fn map_action_to_playbook(action: ActionId, params: ActionParams, health_floor: f64) -> Result<Playbook, PlaybookError> {
    use PlaybookStep as S;
    let svc = params.target_service;
    let steps = match action {
        ActionId::NoOp => return Err(PlaybookError::NoOp),
        ActionId::IsolateContainer => vec![
            S::ApplyNetworkPolicy { service: svc, policy: NetworkPolicy::Quarantined },
            S::ScaleReplicas { service: svc, replicas: 0 },
            S::MarkImageQuarantined { service: svc },
        ],
        ActionId::RollbackDeployment => vec![S::RollbackDeployment],
        ActionId::QuarantineImage => vec![S::MarkImageQuarantined { service: svc }, S::RestartService { service: svc }],
        ActionId::ScaleDownReplicas => vec![S::ScaleReplicas { service: svc, replicas: 1 }],
        ActionId::RestartService => vec![S::RestartService { service: svc }],
        ActionId::BlockNetworkPolicy => vec![S::ApplyNetworkPolicy { service: svc, policy: NetworkPolicy::DenyEgress }],
        ActionId::TriggerScan => vec![S::TriggerScan { service: svc }],
    };
    let rollback_steps = if action == ActionId::RollbackDeployment {
        vec![RollbackStep::RestoreDeployedVersion]
    } else {
        vec![RollbackStep::RestoreServiceControls { service: svc }]
    };
    Ok(Playbook {
        action,
        params,
        steps,
        verify_checks: vec![
            VerifyCheck::ScenarioCleared { incident: params.incident },
            VerifyCheck::HealthAbove { service: svc, floor: health_floor },
        ],
        rollback_steps,
    })
}

/// Conjunction of every check against `state`.
pub fn verify_outcome(pb: &Playbook, state: &EnvState) -> bool {
    pb.verify_checks.iter().all(|c| c.holds(state))
}

/// Disruption weights per playbook step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepCosts {
    pub network_policy: f64,
    pub per_replica_removed: f64,
    pub mark_image: f64,
    pub restart: f64,
    pub rollback: f64,
    pub scan: f64,
}

impl Default for StepCosts {
    fn default() -> Self {
        StepCosts {
            network_policy: 0.2,
            per_replica_removed: 0.1,
            mark_image: 0.1,
            restart: 0.3,
            rollback: 0.5,
            scan: 0.1,
        }
    }
}

impl StepCosts {
    pub fn step_cost(&self, step: &PlaybookStep, snapshot: &EnvState) -> f64 {
        match *step {
            PlaybookStep::ApplyNetworkPolicy { .. } => self.network_policy,
            PlaybookStep::ScaleReplicas { service, replicas } => {
                let now = snapshot.controls.get(service).map_or(0, |c| c.replicas);
                self.per_replica_removed * now.saturating_sub(replicas) as f64
            }
            PlaybookStep::MarkImageQuarantined { .. } => self.mark_image,
            PlaybookStep::RestartService { .. } => self.restart,
            PlaybookStep::RollbackDeployment => self.rollback,
            PlaybookStep::TriggerScan { .. } => self.scan,
        }
    }
}

/// Pre-execution copy of every field a playbook may touch.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub controls: Vec<ServiceControls>,
    pub deployed_version: u64,
    /// Net change the forward steps made to the deployed version.
    pub version_delta: i64,
}

impl Checkpoint {
    pub fn capture(cp: &ControlPlane<'_>) -> Self {
        Checkpoint {
            controls: cp.controls.to_vec(),
            deployed_version: *cp.deployed_version,
            version_delta: 0,
        }
    }
}

/// Carries out playbook steps on the simulated control plane.
pub trait StepExecutor {
    fn run(&mut self, step: &PlaybookStep, cp: &mut ControlPlane<'_>) -> Result<(), StepError>;
    fn restore(&mut self, step: &RollbackStep, checkpoint: &Checkpoint, cp: &mut ControlPlane<'_>) -> Result<(), RollbackError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SimExecutor;

fn service<'a>(cp: &'a mut ControlPlane<'_>, step: &PlaybookStep, i: usize) -> Result<&'a mut ServiceControls, StepError> {
    let n = cp.controls.len();
    cp.controls.get_mut(i).ok_or_else(|| StepError {
        step: *step,
        reason: format!("no service {i} ({n} provisioned)"),
    })
}

impl StepExecutor for SimExecutor {
    fn run(&mut self, step: &PlaybookStep, cp: &mut ControlPlane<'_>) -> Result<(), StepError> {
        match *step {
            PlaybookStep::ApplyNetworkPolicy { service: i, policy } => service(cp, step, i)?.network_policy = policy,
            PlaybookStep::ScaleReplicas { service: i, replicas } => service(cp, step, i)?.replicas = replicas,
            PlaybookStep::MarkImageQuarantined { service: i } => service(cp, step, i)?.image_quarantined = true,
            PlaybookStep::RestartService { service: i } => service(cp, step, i)?.restarts += 1,
            PlaybookStep::TriggerScan { service: i } => service(cp, step, i)?.scans += 1,
            PlaybookStep::RollbackDeployment => {
                if *cp.deployed_version == 0 {
                    return Err(StepError {
                        step: *step,
                        reason: "no earlier deployment to roll back to".into(),
                    });
                }
                *cp.deployed_version -= 1;
            }
        }
        Ok(())
    }

    fn restore(&mut self, step: &RollbackStep, checkpoint: &Checkpoint, cp: &mut ControlPlane<'_>) -> Result<(), RollbackError> {
        match *step {
            RollbackStep::RestoreServiceControls { service } => {
                let (Some(dst), Some(src)) = (cp.controls.get_mut(service), checkpoint.controls.get(service)) else {
                    return Err(RollbackError {
                        step: *step,
                        reason: format!("no service {service}"),
                    });
                };
                *dst = src.clone();
            }
            RollbackStep::RestoreDeployedVersion => {
                // Undo only our own change; the pipeline may have deployed since.
                let v = *cp.deployed_version as i64 - checkpoint.version_delta;
                *cp.deployed_version = u64::try_from(v).map_err(|_| RollbackError {
                    step: *step,
                    reason: format!("version would become {v}"),
                })?;
            }
        }
        Ok(())
    }
}
