//! Security monitor: folds a step's telemetry into vulnerability, metric and
//! log signals, squashes them into a risk score, and assembles the agent's
//! observation.

use std::collections::VecDeque;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::env::{ActionId, EnvState, EventSource, StageId, TelemetryEvent};
use crate::error::ConfigError;

/// (V, M, L): scanner severity, metric excess, signature-bearing log count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalTriple {
    pub vulnerability: f64,
    pub metric: f64,
    pub log: f64,
}

impl Add for SignalTriple {
    type Output = SignalTriple;

    fn add(self, o: SignalTriple) -> SignalTriple {
        SignalTriple {
            vulnerability: self.vulnerability + o.vulnerability,
            metric: self.metric + o.metric,
            log: self.log + o.log,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskWeights {
    pub vulnerability: f64,
    pub metric: f64,
    pub log: f64,
}

impl Default for RiskWeights {
    fn default() -> Self {
        RiskWeights {
            vulnerability: 0.5,
            metric: 0.3,
            log: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    pub weights: RiskWeights,
    pub detection_threshold: f64,
    /// METRIC samples at or below this magnitude are ordinary load.
    pub metric_baseline: f64,
    /// Length H of the remediation-history window.
    pub history_len: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            weights: RiskWeights::default(),
            // All signals are non-negative, so with positive weights the
            // score never drops below 0.5; 0.75 puts the decision boundary
            // at a weighted signal sum of ln 3.
            detection_threshold: 0.75,
            metric_baseline: 1.0,
            history_len: 4,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let w = self.weights;
        for (f, v) in [
            ("monitor.weights.vulnerability", w.vulnerability),
            ("monitor.weights.metric", w.metric),
            ("monitor.weights.log", w.log),
            ("monitor.metric_baseline", self.metric_baseline),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::new(f, "must be finite"));
            }
        }
        if !(self.detection_threshold > 0.0 && self.detection_threshold < 1.0) {
            return Err(ConfigError::new(
                "monitor.detection_threshold",
                format!("is {}, must lie in (0, 1)", self.detection_threshold),
            ));
        }
        if self.history_len == 0 {
            return Err(ConfigError::new("monitor.history_len", "must be at least 1"));
        }
        Ok(())
    }
}

/// V = sum of scanner magnitudes, M = sum of metric magnitudes above the
/// baseline, L = number of log lines carrying a signature.
pub fn normalize(events: &[TelemetryEvent], metric_baseline: f64) -> SignalTriple {
    events.iter().fold(SignalTriple::default(), |mut acc, e| {
        match e.source {
            EventSource::Scanner => acc.vulnerability += e.magnitude,
            EventSource::Metric if e.magnitude > metric_baseline => acc.metric += e.magnitude,
            EventSource::Log if e.signature_id.is_some() => acc.log += 1.0,
            _ => {}
        }
        acc
    })
}

/// Largest f64 strictly below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function, kept inside the open unit interval: where the exact
/// value rounds to 0 or 1 in f64 the nearest representable interior value is
/// returned instead.
pub fn logistic(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

pub fn risk_score(signals: SignalTriple, weights: RiskWeights) -> f64 {
    logistic(
        weights.vulnerability * signals.vulnerability
            + weights.metric * signals.metric
            + weights.log * signals.log,
    )
}

/// One remembered remediation: what was tried and whether it verified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub action: ActionId,
    pub succeeded: bool,
}

impl HistoryEntry {
    pub const NEUTRAL: HistoryEntry = HistoryEntry {
        action: ActionId::NoOp,
        succeeded: false,
    };
}

/// Sliding window of the last H remediation outcomes, newest last.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionHistory {
    window: VecDeque<HistoryEntry>,
}

impl ActionHistory {
    pub fn new(len: usize) -> Self {
        ActionHistory {
            window: std::iter::repeat_n(HistoryEntry::NEUTRAL, len).collect(),
        }
    }

    pub fn push(&mut self, action: ActionId, succeeded: bool) {
        self.window.pop_front();
        self.window.push_back(HistoryEntry { action, succeeded });
    }

    pub fn entries(&self) -> Vec<HistoryEntry> {
        self.window.iter().copied().collect()
    }

    pub fn last(&self) -> HistoryEntry {
        self.window.back().copied().unwrap_or(HistoryEntry::NEUTRAL)
    }
}

/// The agent's observation of the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub rho: f64,
    pub cpu: f64,
    pub mem: f64,
    pub dep_drift: f64,
    pub stage: StageId,
    pub hist_acts: Vec<HistoryEntry>,
}

impl FeatureVector {
    pub fn last_action(&self) -> ActionId {
        self.hist_acts.last().map_or(ActionId::NoOp, |h| h.action)
    }
}

pub fn build_feature_vector(rho: f64, state: &EnvState, history: &ActionHistory) -> FeatureVector {
    debug_assert!(rho > 0.0 && rho < 1.0);
    FeatureVector {
        rho,
        cpu: state.cpu,
        mem: state.mem,
        dep_drift: state.dependency_drift,
        stage: state.stage,
        hist_acts: history.entries(),
    }
}

/// A detector's decision for one window. `score` is whatever the detector
/// thresholds on: the risk score for the monitor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionVerdict {
    pub step: u64,
    pub alert: bool,
    pub score: f64,
}

pub fn detect(fv: &FeatureVector, step: u64, threshold: f64) -> DetectionVerdict {
    DetectionVerdict {
        step,
        alert: fv.rho >= threshold,
        score: fv.rho,
    }
}

/// Stateful wrapper tying the pure monitor functions together for a run.
#[derive(Clone, Debug)]
pub struct SecurityMonitor {
    config: MonitorConfig,
    history: ActionHistory,
}

/// Everything the monitor derives from one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub signals: SignalTriple,
    pub features: FeatureVector,
    pub verdict: DetectionVerdict,
}

impl SecurityMonitor {
    pub fn new(config: MonitorConfig) -> Self {
        let history = ActionHistory::new(config.history_len);
        SecurityMonitor { config, history }
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    pub fn reset(&mut self) {
        self.history = ActionHistory::new(self.config.history_len);
    }

    pub fn observe(&self, events: &[TelemetryEvent], state: &EnvState) -> Observation {
        let signals = normalize(events, self.config.metric_baseline);
        let rho = risk_score(signals, self.config.weights);
        let features = build_feature_vector(rho, state, &self.history);
        let verdict = detect(&features, state.step, self.config.detection_threshold);
        Observation {
            signals,
            features,
            verdict,
        }
    }

    pub fn record(&mut self, action: ActionId, succeeded: bool) {
        self.history.push(action, succeeded);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::SignatureId;
    use proptest::prelude::*;

    fn ev(source: EventSource, sig: Option<u32>, magnitude: f64) -> TelemetryEvent {
        TelemetryEvent {
            step: 0,
            source,
            signature_id: sig.map(SignatureId),
            magnitude,
        }
    }

    #[test]
    fn empty_batch_is_zero_triple() {
        assert_eq!(normalize(&[], 1.0), SignalTriple::default());
    }

    #[test]
    fn three_signed_logs_count_three() {
        let batch = vec![
            ev(EventSource::Log, Some(1001), 0.7),
            ev(EventSource::Log, Some(1002), 0.1),
            ev(EventSource::Log, Some(9005), 3.0),
        ];
        let s = normalize(&batch, 1.0);
        assert_eq!(s, SignalTriple { vulnerability: 0.0, metric: 0.0, log: 3.0 });
    }

    #[test]
    fn unsigned_logs_and_network_are_ignored() {
        let batch = vec![
            ev(EventSource::Log, None, 5.0),
            ev(EventSource::Network, Some(1201), 5.0),
            ev(EventSource::Metric, None, 0.9),
        ];
        assert_eq!(normalize(&batch, 1.0), SignalTriple::default());
    }

    #[test]
    fn risk_score_examples() {
        let unit = RiskWeights { vulnerability: 1.0, metric: 1.0, log: 1.0 };
        assert_eq!(risk_score(SignalTriple::default(), unit), 0.5);

        let w = RiskWeights { vulnerability: 0.5, metric: 0.3, log: 0.2 };
        let s = SignalTriple { vulnerability: 2.0, metric: 1.0, log: 3.0 };
        // 1 / (1 + e^-1.9), evaluated at 50 digits: 0.86989152563700231...
        assert!((risk_score(s, w) - 0.869_891_525_637_002_3).abs() < 1e-12);

        let big = SignalTriple { vulnerability: 1e6, metric: 0.0, log: 0.0 };
        let r = risk_score(big, unit);
        assert!(r < 1.0);
        assert!(1.0 - r <= 1e-6);
    }

    #[test]
    fn logistic_never_reaches_the_endpoints() {
        for x in [-1e308, -1e6, -800.0, -30.0, 0.0, 30.0, 40.0, 1e6, 1e308] {
            let r = logistic(x);
            assert!(r > 0.0 && r < 1.0, "x = {x}");
        }
    }

    #[test]
    fn history_window_semantics() {
        let mut h = ActionHistory::new(4);
        assert_eq!(h.entries(), vec![HistoryEntry::NEUTRAL; 4]);
        h.push(ActionId::IsolateContainer, true);
        assert_eq!(
            h.last(),
            HistoryEntry { action: ActionId::IsolateContainer, succeeded: true }
        );
        for a in [ActionId::RestartService, ActionId::TriggerScan, ActionId::NoOp, ActionId::RollbackDeployment, ActionId::QuarantineImage] {
            h.push(a, false);
        }
        let actions: Vec<ActionId> = h.entries().iter().map(|e| e.action).collect();
        assert_eq!(
            actions,
            vec![ActionId::TriggerScan, ActionId::NoOp, ActionId::RollbackDeployment, ActionId::QuarantineImage]
        );
    }

    #[test]
    fn feature_vector_copies_state_fields() {
        let (env, batch) = crate::env::reset(crate::env::PipelineConfig::default()).unwrap();
        let m = SecurityMonitor::new(MonitorConfig::default());
        let obs = m.observe(batch.events(), env.state());
        let fv = &obs.features;
        assert_eq!(fv.cpu, env.state().cpu);
        assert_eq!(fv.mem, env.state().mem);
        assert_eq!(fv.dep_drift, env.state().dependency_drift);
        assert_eq!(fv.stage, StageId::Commit);
        assert_eq!(fv.hist_acts.len(), 4);
    }

    #[test]
    fn detect_threshold_boundaries() {
        let mut fv = FeatureVector {
            rho: 0.7,
            cpu: 0.1,
            mem: 0.1,
            dep_drift: 0.0,
            stage: StageId::Build,
            hist_acts: vec![HistoryEntry::NEUTRAL; 4],
        };
        assert!(detect(&fv, 0, 0.5).alert);
        fv.rho = 0.5;
        assert!(detect(&fv, 0, 0.5).alert);
        fv.rho = 0.3;
        assert!(!detect(&fv, 0, 0.5).alert);
    }

    fn arb_event() -> impl Strategy<Value = TelemetryEvent> {
        (
            prop_oneof![
                Just(EventSource::Log),
                Just(EventSource::Metric),
                Just(EventSource::Scanner),
                Just(EventSource::Network)
            ],
            proptest::option::of(0u32..10_000),
            0.0f64..5.0,
        )
            .prop_map(|(s, sig, m)| ev(s, sig, m))
    }

    proptest! {
        #[test]
        fn normalize_is_additive(a in proptest::collection::vec(arb_event(), 0..20),
                                 b in proptest::collection::vec(arb_event(), 0..20)) {
            let whole: Vec<TelemetryEvent> = a.iter().chain(b.iter()).cloned().collect();
            let lhs = normalize(&whole, 1.0);
            let rhs = normalize(&a, 1.0) + normalize(&b, 1.0);
            prop_assert!((lhs.vulnerability - rhs.vulnerability).abs() < 1e-9);
            prop_assert!((lhs.metric - rhs.metric).abs() < 1e-9);
            prop_assert_eq!(lhs.log, rhs.log);
        }

        #[test]
        fn risk_score_strictly_increasing(v in 0.0f64..20.0, m in 0.0f64..20.0, l in 0.0f64..20.0,
                                          dv in 0.01f64..5.0, which in 0usize..3) {
            let w = RiskWeights::default();
            let base = SignalTriple { vulnerability: v, metric: m, log: l };
            let mut bumped = base;
            match which {
                0 => bumped.vulnerability += dv,
                1 => bumped.metric += dv,
                _ => bumped.log += dv,
            }
            prop_assert!(risk_score(bumped, w) > risk_score(base, w));
        }

        #[test]
        fn risk_score_inside_open_interval(v in 0.0f64..15.0, m in 0.0f64..15.0, l in 0.0f64..15.0) {
            let r = risk_score(SignalTriple { vulnerability: v, metric: m, log: l }, RiskWeights::default());
            prop_assert!(r > 0.0 && r < 1.0);
        }

        #[test]
        fn detect_depends_only_on_rho(rho in 0.01f64..0.99, cpu in 0.0f64..1.0, mem in 0.0f64..1.0,
                                      drift in 0.0f64..3.0, stage in 0usize..6, thr in 0.01f64..0.99) {
            let a = FeatureVector { rho, cpu: 0.0, mem: 0.0, dep_drift: 0.0, stage: StageId::Commit,
                                    hist_acts: vec![HistoryEntry::NEUTRAL; 4] };
            let b = FeatureVector { rho, cpu, mem, dep_drift: drift, stage: StageId::ALL[stage],
                                    hist_acts: vec![HistoryEntry { action: ActionId::TriggerScan, succeeded: true }; 4] };
            prop_assert_eq!(detect(&a, 0, thr).alert, detect(&b, 0, thr).alert);
        }
    }
}
