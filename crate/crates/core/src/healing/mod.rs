//! Playbook-based remediation with impact estimation, approval, verification
//! and rollback.

mod playbook;
#[cfg(test)]
mod tests;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use playbook::{
    map_action_to_playbook, verify_outcome, ActionParams, Checkpoint, Playbook, PlaybookError, PlaybookStep,
    RollbackError, RollbackStep, SimExecutor, StepCosts, StepError, StepExecutor, VerifyCheck,
};

use crate::env::{ActionEffectTable, ActionId, EnvState, PipelineEnv, StepOutcome};
use crate::error::{ConfigError, EnvError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpactEstimate {
    pub p_succ: f64,
    pub b_sec: f64,
    pub d_ops: f64,
    pub impact: f64,
}

pub fn mitigation_utility(est: &ImpactEstimate) -> f64 {
    est.p_succ * est.b_sec - est.d_ops
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ApprovalMode {
    AlwaysApprove,
    AlwaysDeny,
    UtilityPositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApprovalPolicy {
    pub impact_threshold: f64,
    pub mode: ApprovalMode,
    /// Auto-approve above the threshold and consult the policy below it,
    /// i.e. the branch order of the original pseudocode listing.
    pub literal_listing: bool,
}

impl Default for ApprovalPolicy {
    fn default() -> Self {
        ApprovalPolicy {
            impact_threshold: 1.0,
            mode: ApprovalMode::UtilityPositive,
            literal_listing: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Approval {
    Auto,
    PolicyApproved,
    PolicyDenied,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApprovalDecision {
    pub approval: Approval,
    pub reason: String,
}

pub fn approve(est: &ImpactEstimate, policy: &ApprovalPolicy) -> ApprovalDecision {
    let above = est.impact > policy.impact_threshold;
    let automatic = if policy.literal_listing { above } else { !above };
    if automatic {
        let cmp = if above { ">" } else { "<=" };
        return ApprovalDecision {
            approval: Approval::Auto,
            reason: format!("impact {:.3} {cmp} threshold {:.3}", est.impact, policy.impact_threshold),
        };
    }
    let u = mitigation_utility(est);
    let (approval, reason) = match policy.mode {
        ApprovalMode::AlwaysApprove => (Approval::PolicyApproved, "policy ALWAYS_APPROVE".to_string()),
        ApprovalMode::AlwaysDeny => (Approval::PolicyDenied, "policy ALWAYS_DENY".to_string()),
        ApprovalMode::UtilityPositive if u > 0.0 => (Approval::PolicyApproved, format!("utility {u:.3} > 0")),
        ApprovalMode::UtilityPositive => (Approval::PolicyDenied, format!("utility {u:.3} <= 0")),
    };
    ApprovalDecision { approval, reason }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HealingConfig {
    /// When false the orchestrator only observes: every step is a NO_OP.
    pub enabled: bool,
    pub approval: ApprovalPolicy,
    /// B_sec = risk score times this scale.
    pub benefit_scale: f64,
    /// Success prior used when no attack is known to be active, or when
    /// `known_dynamics` is off.
    pub prior_success: f64,
    /// Read success probabilities from the environment's effect table.
    pub known_dynamics: bool,
    pub health_floor: f64,
    pub step_costs: StepCosts,
}

impl Default for HealingConfig {
    fn default() -> Self {
        HealingConfig {
            enabled: true,
            approval: ApprovalPolicy::default(),
            benefit_scale: 10.0,
            prior_success: 0.5,
            known_dynamics: true,
            health_floor: 0.0,
            step_costs: StepCosts::default(),
        }
    }
}

impl HealingConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = self.approval.impact_threshold;
        if !(t.is_finite() && t >= 0.0) {
            return Err(ConfigError::new("healing.approval.impact_threshold", format!("is {t}, must be finite and >= 0")));
        }
        if !(self.benefit_scale.is_finite() && self.benefit_scale >= 0.0) {
            return Err(ConfigError::new("healing.benefit_scale", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.prior_success) {
            return Err(ConfigError::new("healing.prior_success", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.health_floor) {
            return Err(ConfigError::new("healing.health_floor", "must lie in [0, 1)"));
        }
        let c = &self.step_costs;
        for (f, v) in [
            ("healing.step_costs.network_policy", c.network_policy),
            ("healing.step_costs.per_replica_removed", c.per_replica_removed),
            ("healing.step_costs.mark_image", c.mark_image),
            ("healing.step_costs.restart", c.restart),
            ("healing.step_costs.rollback", c.rollback),
            ("healing.step_costs.scan", c.scan),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::new(f, format!("is {v}, must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Does not touch the live environment.
pub fn simulate_impact(
    pb: &Playbook,
    snapshot: &EnvState,
    effects: &ActionEffectTable,
    rho: f64,
    config: &HealingConfig,
) -> ImpactEstimate {
    let p_succ = match snapshot.strongest_attack() {
        Some(a) if config.known_dynamics => effects.effect(a.kind, pb.action).success_prob,
        _ => config.prior_success,
    };
    let d_ops: f64 = pb
        .steps
        .iter()
        .map(|s| config.step_costs.step_cost(s, snapshot))
        .sum();
    ImpactEstimate {
        p_succ,
        b_sec: rho * config.benefit_scale,
        d_ops,
        impact: d_ops,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HealingRecord {
    pub step: u64,
    pub action: ActionId,
    pub params: ActionParams,
    pub approval: Approval,
    pub executed: bool,
    pub verified: bool,
    pub rolled_back: bool,
    pub utility: f64,
    pub impact: ImpactEstimate,
    pub justification: String,
    pub reason: String,
    pub unrecoverable: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum HealingError {
    #[error(transparent)]
    Playbook(#[from] PlaybookError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("UNRECOVERABLE at step {}: {action} rollback failed: {source}", record.step, action = record.action)]
    Unrecoverable {
        record: Box<HealingRecord>,
        source: RollbackError,
    },
}

#[derive(Clone, Debug)]
pub struct HealingResult {
    pub record: HealingRecord,
    /// The environment transition that ran, or `None` if the action was
    /// denied and the environment was not touched.
    pub outcome: Option<StepOutcome>,
}

fn rollback<E: StepExecutor>(
    pb: &Playbook,
    checkpoint: &Checkpoint,
    env: &mut PipelineEnv,
    executor: &mut E,
    record: &mut HealingRecord,
) -> Result<(), HealingError> {
    let mut cp = env.control_plane();
    for step in &pb.rollback_steps {
        if let Err(e) = executor.restore(step, checkpoint, &mut cp) {
            record.unrecoverable = true;
            record.reason = format!("{}; rollback failed: {e}", record.reason);
            return Err(HealingError::Unrecoverable {
                record: Box::new(record.clone()),
                source: e,
            });
        }
    }
    record.rolled_back = true;
    Ok(())
}

/// Map, simulate, approve, execute, verify one step later, and roll back if
/// verification fails. An approved action advances the environment exactly
/// one step; a denied one leaves it untouched.
pub fn execute_healing<E: StepExecutor>(
    action: ActionId,
    params: ActionParams,
    env: &mut PipelineEnv,
    rho: f64,
    config: &HealingConfig,
    executor: &mut E,
) -> Result<HealingResult, HealingError> {
    let pb = map_action_to_playbook(action, params, config.health_floor)?;
    let est = simulate_impact(&pb, env.state(), &env.config().action_effects, rho, config);
    let decision = approve(&est, &config.approval);
    let utility = mitigation_utility(&est);
    let mut record = HealingRecord {
        step: env.state().step,
        action,
        params,
        approval: decision.approval,
        executed: false,
        verified: false,
        rolled_back: false,
        utility,
        impact: est,
        justification: format!(
            "{action} on service {}: risk {rho:.3}, p_succ {:.2}, benefit {:.2}, disruption {:.2}, utility {utility:.3}",
            params.target_service, est.p_succ, est.b_sec, est.d_ops
        ),
        reason: decision.reason,
        unrecoverable: false,
    };
    if decision.approval == Approval::PolicyDenied {
        return Ok(HealingResult { record, outcome: None });
    }
    if params.target_service >= env.state().service_health.len() {
        return Err(EnvError::NoSuchService {
            index: params.target_service,
            count: env.state().service_health.len(),
        }
        .into());
    }

    record.executed = true;
    let mut cp = env.control_plane();
    let mut checkpoint = Checkpoint::capture(&cp);
    let mut failure = None;
    for step in &pb.steps {
        let before = *cp.deployed_version as i64;
        let r = executor.run(step, &mut cp);
        checkpoint.version_delta += *cp.deployed_version as i64 - before;
        if let Err(e) = r {
            failure = Some(e);
            break;
        }
    }
    if let Some(e) = failure {
        record.reason = format!("{}; execution failed: {e}", record.reason);
        rollback(&pb, &checkpoint, env, executor, &mut record)?;
        let outcome = env.step_targeted(ActionId::NoOp, params.target_service)?;
        return Ok(HealingResult { record, outcome: Some(outcome) });
    }

    let outcome = env.step_targeted(action, params.target_service)?;
    record.verified = verify_outcome(&pb, env.state());
    if !record.verified {
        record.reason = format!("{}; verification failed", record.reason);
        rollback(&pb, &checkpoint, env, executor, &mut record)?;
    }
    Ok(HealingResult { record, outcome: Some(outcome) })
}

/// Aim at the strongest active attack, else the weakest service.
pub fn params_for(state: &EnvState) -> ActionParams {
    ActionParams {
        target_service: state.default_target(),
        incident: state.strongest_attack().map(|a| a.id),
    }
}

/// Result of advancing the environment by one decision.
#[derive(Clone, Debug)]
pub struct Tick {
    pub outcome: StepOutcome,
    pub record: Option<HealingRecord>,
    pub verified: bool,
}

/// Drives one environment through remediation decisions and keeps the
/// append-only healing log.
#[derive(Clone, Debug)]
pub struct Orchestrator<E: StepExecutor = SimExecutor> {
    config: HealingConfig,
    executor: E,
    log: Vec<HealingRecord>,
}

impl Orchestrator<SimExecutor> {
    pub fn new(config: HealingConfig) -> Self {
        Self::with_executor(config, SimExecutor)
    }
}

impl<E: StepExecutor> Orchestrator<E> {
    pub fn with_executor(config: HealingConfig, executor: E) -> Self {
        Orchestrator {
            config,
            executor,
            log: Vec::new(),
        }
    }

    pub fn config(&self) -> &HealingConfig {
        &self.config
    }

    pub fn log(&self) -> &[HealingRecord] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<HealingRecord> {
        std::mem::take(&mut self.log)
    }

    /// Always advances `env` by exactly one step.
    pub fn tick(&mut self, env: &mut PipelineEnv, action: ActionId, rho: f64) -> Result<Tick, HealingError> {
        let noop = |env: &mut PipelineEnv| -> Result<Tick, HealingError> {
            Ok(Tick {
                outcome: env.step(ActionId::NoOp)?,
                record: None,
                verified: false,
            })
        };
        if !self.config.enabled || action == ActionId::NoOp {
            return noop(env);
        }
        let params = params_for(env.state());
        let result = match execute_healing(action, params, env, rho, &self.config, &mut self.executor) {
            Ok(r) => r,
            Err(HealingError::Unrecoverable { record, source }) => {
                self.log.push((*record).clone());
                return Err(HealingError::Unrecoverable { record, source });
            }
            Err(e) => return Err(e),
        };
        self.log.push(result.record.clone());
        match result.outcome {
            Some(outcome) => Ok(Tick {
                outcome,
                verified: result.record.verified,
                record: Some(result.record),
            }),
            None => {
                let mut t = noop(env)?;
                t.record = Some(result.record);
                Ok(t)
            }
        }
    }
}

pub fn write_healing_log<W: Write>(w: W, log: &[HealingRecord]) -> std::io::Result<()> {
    crate::env::log::write_jsonl(w, log)
}
