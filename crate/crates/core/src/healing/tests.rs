use super::*;
use crate::env::{
    reset, ActionEffect, AttackKind, AttackSchedule, ControlPlane, NetworkPolicy, PipelineConfig, ScheduledAttack,
};

fn attacked_env(kind: AttackKind, at: u64) -> PipelineEnv {
    let cfg = PipelineConfig {
        episode_length: 60,
        attack_schedule: AttackSchedule::Fixed(vec![ScheduledAttack {
            step: at,
            kind,
            target_service: Some(2),
            duration_cap: None,
        }]),
        rng_seed: 3,
        ..PipelineConfig::default()
    };
    let (mut env, _) = reset(cfg).unwrap();
    for _ in 0..at {
        env.step(ActionId::NoOp).unwrap();
    }
    env
}

fn with_certainty(mut env_cfg: PipelineConfig, kind: AttackKind, action: ActionId, p: f64) -> PipelineConfig {
    env_cfg.action_effects.set_effect(kind, action, ActionEffect { success_prob: p, disruption_cost: 0.3, uptime_penalty: 0.05 });
    env_cfg
}

fn env_with(kind: AttackKind, action: ActionId, p: f64) -> PipelineEnv {
    let base = attacked_env(kind, 3).config().clone();
    let (mut env, _) = reset(with_certainty(base, kind, action, p)).unwrap();
    for _ in 0..3 {
        env.step(ActionId::NoOp).unwrap();
    }
    env
}

fn est(p_succ: f64, b_sec: f64, d_ops: f64) -> ImpactEstimate {
    ImpactEstimate { p_succ, b_sec, d_ops, impact: d_ops }
}

#[test]
fn utility_examples() {
    assert!((mitigation_utility(&est(1.0, 1.0, 0.0)) - 1.0).abs() < 1e-12);
    assert!((mitigation_utility(&est(0.0, 123.0, 0.7)) + 0.7).abs() < 1e-12);
    assert!((mitigation_utility(&est(0.8, 10.0, 2.0)) - 6.0).abs() < 1e-12);
}

#[test]
fn approval_examples() {
    let p = |t, mode| ApprovalPolicy { impact_threshold: t, mode, literal_listing: false };
    assert_eq!(approve(&est(0.5, 1.0, 0.0), &p(0.0, ApprovalMode::AlwaysDeny)).approval, Approval::Auto);
    assert_eq!(approve(&est(0.5, 1.0, 5.0), &p(2.0, ApprovalMode::AlwaysDeny)).approval, Approval::PolicyDenied);
    // utility 0.8 * 13.75 - 5 = 6
    let d = approve(&est(0.8, 13.75, 5.0), &p(2.0, ApprovalMode::UtilityPositive));
    assert_eq!(d.approval, Approval::PolicyApproved);
    assert_eq!(approve(&est(0.1, 1.0, 5.0), &p(2.0, ApprovalMode::UtilityPositive)).approval, Approval::PolicyDenied);
}

#[test]
fn literal_listing_inverts_the_branches() {
    let p = ApprovalPolicy { impact_threshold: 2.0, mode: ApprovalMode::AlwaysDeny, literal_listing: true };
    assert_eq!(approve(&est(0.5, 1.0, 5.0), &p).approval, Approval::Auto);
    assert_eq!(approve(&est(0.5, 1.0, 1.0), &p).approval, Approval::PolicyDenied);
}

#[test]
fn isolate_playbook_steps() {
    let params = ActionParams { target_service: 3, incident: None };
    let pb = map_action_to_playbook(ActionId::IsolateContainer, params, 0.0).unwrap();
    assert_eq!(
        pb.steps,
        vec![
            PlaybookStep::ApplyNetworkPolicy { service: 3, policy: NetworkPolicy::Quarantined },
            PlaybookStep::ScaleReplicas { service: 3, replicas: 0 },
            PlaybookStep::MarkImageQuarantined { service: 3 },
        ]
    );
    assert!(!pb.rollback_steps.is_empty());
}

#[test]
fn noop_has_no_playbook() {
    let params = ActionParams { target_service: 0, incident: None };
    assert_eq!(map_action_to_playbook(ActionId::NoOp, params, 0.0), Err(PlaybookError::NoOp));
}

#[test]
fn rollback_playbook_decrements_version() {
    let (mut env, _) = reset(PipelineConfig::default()).unwrap();
    *env.control_plane().deployed_version = 4;
    let pb = map_action_to_playbook(ActionId::RollbackDeployment, ActionParams { target_service: 0, incident: None }, 0.0).unwrap();
    let mut cp = env.control_plane();
    for s in &pb.steps {
        SimExecutor.run(s, &mut cp).unwrap();
    }
    assert_eq!(*cp.deployed_version, 3);
}

#[test]
fn rollback_then_reexecute_round_trips_every_action() {
    for action in &ActionId::ALL[1..] {
        let (mut env, _) = reset(PipelineConfig::default()).unwrap();
        *env.control_plane().deployed_version = 2;
        let pb = map_action_to_playbook(*action, ActionParams { target_service: 1, incident: None }, 0.0).unwrap();
        let run = |env: &mut PipelineEnv| {
            let mut cp = env.control_plane();
            let mut ck = Checkpoint::capture(&cp);
            for s in &pb.steps {
                let before = *cp.deployed_version as i64;
                SimExecutor.run(s, &mut cp).unwrap();
                ck.version_delta += *cp.deployed_version as i64 - before;
            }
            ck
        };
        let pre = env.state().clone();
        let ck = run(&mut env);
        let post = env.state().clone();
        assert_ne!(pre, post, "{action} touched nothing");
        let mut cp = env.control_plane();
        for r in &pb.rollback_steps {
            SimExecutor.restore(r, &ck, &mut cp).unwrap();
        }
        assert_eq!(env.state(), &pre, "{action} rollback");
        run(&mut env);
        assert_eq!(env.state(), &post, "{action} re-execute");
    }
}

#[test]
fn zero_cost_playbook_has_zero_impact() {
    let env = attacked_env(AttackKind::Cryptominer, 3);
    let cfg = HealingConfig {
        step_costs: StepCosts { network_policy: 0.0, per_replica_removed: 0.0, mark_image: 0.0, restart: 0.0, rollback: 0.0, scan: 0.0 },
        ..HealingConfig::default()
    };
    for action in &ActionId::ALL[1..] {
        let pb = map_action_to_playbook(*action, params_for(env.state()), 0.0).unwrap();
        assert_eq!(simulate_impact(&pb, env.state(), &env.config().action_effects, 0.9, &cfg).impact, 0.0);
    }
}

#[test]
fn success_probability_is_a_table_lookup() {
    let env = env_with(AttackKind::Cryptominer, ActionId::IsolateContainer, 0.9);
    let pb = map_action_to_playbook(ActionId::IsolateContainer, params_for(env.state()), 0.0).unwrap();
    let e = simulate_impact(&pb, env.state(), &env.config().action_effects, 0.5, &HealingConfig::default());
    assert_eq!(e.p_succ, 0.9);
}

#[test]
fn no_attack_uses_prior() {
    let (env, _) = reset(PipelineConfig::default()).unwrap();
    let pb = map_action_to_playbook(ActionId::RestartService, params_for(env.state()), 0.0).unwrap();
    let e = simulate_impact(&pb, env.state(), &env.config().action_effects, 0.5, &HealingConfig::default());
    assert_eq!(e.p_succ, 0.5);
}

/// Fixture: cryptominer active on service 2 (3 replicas), risk 0.8.
/// Recomputed by hand from the default tables:
///   ISOLATE  p = 0.75, b = 8.0, d = 0.2 + 3 * 0.1 + 0.1 = 0.6, U = 5.4
///   QUARANTINE  p = 0.60, d = 0.1 + 0.3 = 0.4, U = 4.4
///   SCALE_DOWN  p = 0.70, d = 2 * 0.1 = 0.2, U = 5.4
///   ROLLBACK  p = 0.20, d = 0.5, U = 1.1
#[test]
fn fixture_estimates_match_hand_computation() {
    let env = attacked_env(AttackKind::Cryptominer, 3);
    let cfg = HealingConfig::default();
    let expected = [
        (ActionId::IsolateContainer, 0.75, 0.6, 5.4),
        (ActionId::QuarantineImage, 0.60, 0.4, 4.4),
        (ActionId::ScaleDownReplicas, 0.70, 0.2, 5.4),
        (ActionId::RollbackDeployment, 0.20, 0.5, 1.1),
    ];
    for (a, p, d, u) in expected {
        let pb = map_action_to_playbook(a, params_for(env.state()), 0.0).unwrap();
        let e = simulate_impact(&pb, env.state(), &env.config().action_effects, 0.8, &cfg);
        assert!((e.p_succ - p).abs() < 1e-12, "{a}");
        assert!((e.b_sec - 8.0).abs() < 1e-12, "{a}");
        assert!((e.d_ops - d).abs() < 1e-12, "{a}");
        assert!((mitigation_utility(&e) - u).abs() < 1e-9, "{a}");
    }
}

#[test]
fn simulate_does_not_mutate_env() {
    let env = attacked_env(AttackKind::Cryptominer, 3);
    let h = env.digest();
    let pb = map_action_to_playbook(ActionId::IsolateContainer, params_for(env.state()), 0.0).unwrap();
    simulate_impact(&pb, env.state(), &env.config().action_effects, 0.8, &HealingConfig::default());
    assert_eq!(env.digest(), h);
}

#[test]
fn verify_examples() {
    let env = attacked_env(AttackKind::Cryptominer, 3);
    let id = env.state().active_attacks[0].id;
    let mut pb = map_action_to_playbook(ActionId::RestartService, params_for(env.state()), 0.0).unwrap();
    assert!(!verify_outcome(&pb, env.state()));
    for c in &pb.verify_checks {
        let oracle = match *c {
            VerifyCheck::ScenarioCleared { incident } => incident.is_some_and(|i| !env.state().active_attacks.iter().any(|a| a.id == i)),
            VerifyCheck::HealthAbove { service, floor } => env.state().service_health[service] > floor,
        };
        assert_eq!(c.holds(env.state()), oracle);
    }
    assert_eq!(pb.params.incident, Some(id));
    pb.verify_checks.clear();
    assert!(verify_outcome(&pb, env.state()));
}

#[test]
fn happy_path_verifies() {
    let mut env = env_with(AttackKind::Cryptominer, ActionId::RestartService, 1.0);
    let mut orch = Orchestrator::new(HealingConfig::default());
    let t = orch.tick(&mut env, ActionId::RestartService, 0.9).unwrap();
    let r = t.record.unwrap();
    assert!(r.executed && r.verified && !r.rolled_back);
    assert!(t.verified);
    assert!(env.state().active_attacks.is_empty());
    assert_eq!(env.state().controls[2].restarts, 1);
}

#[test]
fn failed_verification_rolls_back() {
    let mut env = env_with(AttackKind::Cryptominer, ActionId::IsolateContainer, 0.0);
    let mut twin = env.clone();
    let mut orch = Orchestrator::new(HealingConfig::default());
    let r = orch.tick(&mut env, ActionId::IsolateContainer, 0.9).unwrap().record.unwrap();
    assert!(r.executed && !r.verified && r.rolled_back);
    // The playbook's control changes are gone; only the simulator's own step remains.
    twin.step_targeted(ActionId::IsolateContainer, 2).unwrap();
    assert_eq!(env.digest(), twin.digest());
}

#[test]
fn denial_leaves_env_untouched() {
    let mut env = attacked_env(AttackKind::Cryptominer, 3);
    let h = env.digest();
    let cfg = HealingConfig {
        approval: ApprovalPolicy { impact_threshold: 0.0, mode: ApprovalMode::AlwaysDeny, literal_listing: false },
        ..HealingConfig::default()
    };
    let params = params_for(env.state());
    let r = execute_healing(ActionId::IsolateContainer, params, &mut env, 0.9, &cfg, &mut SimExecutor).unwrap();
    assert_eq!(r.record.approval, Approval::PolicyDenied);
    assert!(!r.record.executed);
    assert!(r.outcome.is_none());
    assert_eq!(env.digest(), h);
}

#[test]
fn observe_only_matches_noop_trajectory() {
    let cfg = PipelineConfig::default().with_seed(21);
    let (mut a, _) = reset(cfg.clone()).unwrap();
    let (mut b, _) = reset(cfg).unwrap();
    let mut orch = Orchestrator::new(HealingConfig { enabled: false, ..HealingConfig::default() });
    let mut i = 0;
    while !a.is_done() {
        orch.tick(&mut a, ActionId::ALL[i % 8], 0.9).unwrap();
        b.step(ActionId::NoOp).unwrap();
        i += 1;
    }
    assert_eq!(a.digest(), b.digest());
    assert!(orch.log().is_empty());
}

struct Faulty {
    fail_run_at: Option<usize>,
    fail_restore: bool,
    calls: usize,
}

impl StepExecutor for Faulty {
    fn run(&mut self, step: &PlaybookStep, cp: &mut ControlPlane<'_>) -> Result<(), StepError> {
        let i = self.calls;
        self.calls += 1;
        if self.fail_run_at == Some(i) {
            return Err(StepError { step: *step, reason: "injected".into() });
        }
        SimExecutor.run(step, cp)
    }

    fn restore(&mut self, step: &RollbackStep, ck: &Checkpoint, cp: &mut ControlPlane<'_>) -> Result<(), RollbackError> {
        if self.fail_restore {
            return Err(RollbackError { step: *step, reason: "injected".into() });
        }
        SimExecutor.restore(step, ck, cp)
    }
}

#[test]
fn step_failure_rolls_back_partial_changes() {
    let mut env = attacked_env(AttackKind::Cryptominer, 3);
    let mut twin = env.clone();
    let mut orch = Orchestrator::with_executor(HealingConfig::default(), Faulty { fail_run_at: Some(1), fail_restore: false, calls: 0 });
    let r = orch.tick(&mut env, ActionId::IsolateContainer, 0.9).unwrap().record.unwrap();
    assert!(r.executed && !r.verified && r.rolled_back);
    twin.step(ActionId::NoOp).unwrap();
    assert_eq!(env.digest(), twin.digest());
}

#[test]
fn rollback_failure_is_unrecoverable() {
    let mut env = env_with(AttackKind::Cryptominer, ActionId::RestartService, 0.0);
    let mut orch = Orchestrator::with_executor(HealingConfig::default(), Faulty { fail_run_at: None, fail_restore: true, calls: 0 });
    let err = orch.tick(&mut env, ActionId::RestartService, 0.9).unwrap_err();
    assert!(matches!(err, HealingError::Unrecoverable { .. }));
    assert!(err.to_string().starts_with("UNRECOVERABLE"));
    assert!(orch.log().last().unwrap().unrecoverable);
}

#[test]
fn records_satisfy_invariants_over_random_runs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    for seed in 0..8 {
        let (mut env, _) = reset(PipelineConfig::default().with_seed(seed)).unwrap();
        let mut orch = Orchestrator::new(HealingConfig::default());
        while !env.is_done() {
            let a = ActionId::ALL[rng.gen_range(0..8)];
            orch.tick(&mut env, a, rng.gen()).unwrap();
        }
        for r in orch.log() {
            assert!(!r.rolled_back || (r.executed && !r.verified));
            assert!(!r.executed || r.approval != Approval::PolicyDenied);
            assert!(r.executed || !r.verified);
        }
    }
}

#[test]
fn healing_log_jsonl_round_trips() {
    let mut env = env_with(AttackKind::Cryptominer, ActionId::RestartService, 1.0);
    let mut orch = Orchestrator::new(HealingConfig::default());
    orch.tick(&mut env, ActionId::RestartService, 0.9).unwrap();
    let mut buf = Vec::new();
    write_healing_log(&mut buf, orch.log()).unwrap();
    let back: Vec<HealingRecord> = crate::env::log::read_jsonl(buf.as_slice()).unwrap();
    assert_eq!(back, orch.log());
}
