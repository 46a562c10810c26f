use serde::{Deserialize, Serialize};

use super::config::SystemId;
use crate::env::{GroundTruth, IncidentEnd, IncidentRecord};
use crate::healing::HealingRecord;
use crate::monitor::DetectionVerdict;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// (TP + TN) / total, in percent.
    pub fn da(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        100.0 * (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// FP / (FP + TN), in percent.
    pub fn fpr(&self) -> f64 {
        if self.fp + self.tn == 0 {
            return 0.0;
        }
        100.0 * self.fp as f64 / (self.fp + self.tn) as f64
    }

    /// TP / (TP + FN); `None` without positive windows.
    pub fn recall(&self) -> Option<f64> {
        (self.tp + self.fn_ > 0).then(|| self.tp as f64 / (self.tp + self.fn_) as f64)
    }

    pub fn add(&mut self, o: &Confusion) {
        self.tp += o.tp;
        self.tn += o.tn;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Per-incident recovery outcome.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub incident: u32,
    pub onset_step: u64,
    /// Steps from onset to verified remediation, if that happened.
    pub time_to_recover: Option<u64>,
    /// Steps the incident was active, whatever ended it.
    pub active_steps: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mttr {
    /// Mean over recovered incidents; absent when none recovered.
    pub mean: Option<f64>,
    pub recovered: u64,
    pub never_recovered: u64,
    /// Mean over all incidents, counting unrecovered ones at their active
    /// duration.
    pub censored_mean: Option<f64>,
}

pub fn summarize_mttr(rec: &[Recovery]) -> Mttr {
    let times: Vec<u64> = rec.iter().filter_map(|r| r.time_to_recover).collect();
    let mean = |v: &[u64]| (!v.is_empty()).then(|| v.iter().sum::<u64>() as f64 / v.len() as f64);
    let censored: Vec<u64> = rec.iter().map(|r| r.time_to_recover.unwrap_or(r.active_steps)).collect();
    Mttr {
        mean: mean(&times),
        recovered: times.len() as u64,
        never_recovered: (rec.len() - times.len()) as u64,
        censored_mean: mean(&censored),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegrityError {
    #[error("{verdicts} verdicts for {truth} ground-truth windows")]
    LengthMismatch { verdicts: usize, truth: usize },
    #[error("window {index}: verdict for step {verdict_step}, truth for step {truth_step}")]
    StepMismatch { index: usize, verdict_step: u64, truth_step: u64 },
}

pub fn confusion(verdicts: &[DetectionVerdict], truth: &[(u64, GroundTruth)]) -> Result<Confusion, IntegrityError> {
    if verdicts.len() != truth.len() {
        return Err(IntegrityError::LengthMismatch { verdicts: verdicts.len(), truth: truth.len() });
    }
    let mut c = Confusion::default();
    for (i, (v, (step, label))) in verdicts.iter().zip(truth).enumerate() {
        if v.step != *step {
            return Err(IntegrityError::StepMismatch { index: i, verdict_step: v.step, truth_step: *step });
        }
        match (v.alert, label.is_malicious()) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// An incident counts as recovered at step `s` when the simulator records
/// it remediated at `s` and a healing action taken at `s - 1` verified.
pub fn recoveries(incidents: &[IncidentRecord], healing: &[HealingRecord], episode_end: u64) -> Vec<Recovery> {
    incidents
        .iter()
        .map(|inc| {
            let (end, ttr) = match inc.end {
                IncidentEnd::Remediated { step } => {
                    let verified = healing.iter().any(|h| h.verified && h.step + 1 == step);
                    (step, verified.then(|| step - inc.onset_step))
                }
                IncidentEnd::TimedOut { step } => (step, None),
                IncidentEnd::Unresolved => (episode_end, None),
            };
            Recovery {
                incident: inc.id,
                onset_step: inc.onset_step,
                time_to_recover: ttr,
                active_steps: end - inc.onset_step,
            }
        })
        .collect()
}

pub const PCT_WINDOW: usize = 100;
pub const PCT_BAND: f64 = 0.05;

/// Trailing moving averages; entry `i` covers episodes `i + 1 - window ..= i`
/// (zero-based) and exists only once the window is full.
pub fn moving_average(curve: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || curve.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(curve.len() - window + 1);
    let mut sum: f64 = curve[..window].iter().sum();
    out.push(sum / window as f64);
    for i in window..curve.len() {
        sum += curve[i] - curve[i - window];
        out.push(sum / window as f64);
    }
    out
}

/// First episode (one-based) whose trailing `window`-episode mean lies
/// within `band` (relative) of the mean of the final `window` episodes.
pub fn policy_convergence(curve: &[f64], window: usize, band: f64) -> Option<u64> {
    let ma = moving_average(curve, window);
    let fin = *ma.last()?;
    let tol = band * fin.abs();
    ma.iter()
        .position(|m| (m - fin).abs() <= tol)
        .map(|i| (i + window) as u64)
}

/// Per-run metrics before aggregation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub confusion: Confusion,
    pub da: f64,
    pub fpr: f64,
    pub mttr: Mttr,
    pub pct: Option<u64>,
}

pub fn compute_metrics(
    verdicts: &[DetectionVerdict],
    truth: &[(u64, GroundTruth)],
    recoveries: &[Recovery],
    curve: Option<&[f64]>,
) -> Result<RunMetrics, IntegrityError> {
    let c = confusion(verdicts, truth)?;
    Ok(RunMetrics {
        confusion: c,
        da: c.da(),
        fpr: c.fpr(),
        mttr: summarize_mttr(recoveries),
        pct: curve.and_then(|c| policy_convergence(c, PCT_WINDOW, PCT_BAND)),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub metrics: RunMetrics,
    /// SHA-256 of the run's events.jsonl.
    pub events_sha256: String,
    /// SHA-256 of the action-independent part of the run: attack schedules
    /// and benign traffic.
    pub exogenous_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub system: SystemId,
    pub da: f64,
    pub fpr: f64,
    /// Mean steps (one step = one second) from onset to verified recovery.
    pub mttr: Option<f64>,
    pub mttr_never_recovered: u64,
    pub mttr_censored: Option<f64>,
    pub pct: Option<f64>,
    pub confusion: Confusion,
    pub seeds: Vec<u64>,
    pub config_digest: String,
    pub per_seed: Vec<SeedRow>,
}

/// Pools confusion counts and incidents over seeds; PCT is the mean of the
/// per-seed values when every seed has one.
pub fn aggregate(system: SystemId, rows: Vec<SeedRow>, recoveries: &[Recovery], config_digest: &str) -> MetricsReport {
    let mut c = Confusion::default();
    for r in &rows {
        c.add(&r.metrics.confusion);
    }
    let m = summarize_mttr(recoveries);
    let pcts: Option<Vec<u64>> = rows.iter().map(|r| r.metrics.pct).collect();
    let pct = pcts
        .filter(|p| !p.is_empty())
        .map(|p| p.iter().sum::<u64>() as f64 / p.len() as f64);
    MetricsReport {
        system,
        da: c.da(),
        fpr: c.fpr(),
        mttr: m.mean,
        mttr_never_recovered: m.never_recovered,
        mttr_censored: m.censored_mean,
        pct,
        confusion: c,
        seeds: rows.iter().map(|r| r.seed).collect(),
        config_digest: config_digest.to_string(),
        per_seed: rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::AttackKind;

    /// Builds a window log holding exactly the requested counts, shuffled
    /// by a fixed stride so the classes interleave.
    fn fixture(tp: u64, tn: u64, fp: u64, fn_: u64) -> (Vec<DetectionVerdict>, Vec<(u64, GroundTruth)>) {
        let mut cells = Vec::new();
        cells.extend(std::iter::repeat_n((true, true), tp as usize));
        cells.extend(std::iter::repeat_n((false, false), tn as usize));
        cells.extend(std::iter::repeat_n((true, false), fp as usize));
        cells.extend(std::iter::repeat_n((false, true), fn_ as usize));
        let n = cells.len();
        let order: Vec<usize> = (0..n).map(|i| (i * 37) % n).collect();
        let mal = GroundTruth::Malicious(AttackKind::Cryptominer);
        let mut v = Vec::new();
        let mut t = Vec::new();
        for (step, i) in order.into_iter().enumerate() {
            let (alert, bad) = cells[i];
            v.push(DetectionVerdict { step: step as u64, alert, score: 0.0 });
            t.push((step as u64, if bad { mal } else { GroundTruth::Benign }));
        }
        (v, t)
    }

    #[test]
    fn counting_oracle_example() {
        let (v, t) = fixture(7, 95, 5, 1);
        // Independent count straight off the fixture.
        let count = |alert: bool, bad: bool| {
            v.iter().zip(&t).filter(|(a, (_, l))| a.alert == alert && l.is_malicious() == bad).count() as u64
        };
        let m = compute_metrics(&v, &t, &[], None).unwrap();
        assert_eq!(m.confusion, Confusion { tp: count(true, true), tn: count(false, false), fp: count(true, false), fn_: count(false, true) });
        assert!((m.da - 102.0 / 108.0 * 100.0).abs() < 1e-9);
        assert!((m.da - 94.44).abs() < 0.01);
        assert!((m.fpr - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_incidents_leave_mttr_absent() {
        let (v, t) = fixture(0, 10, 0, 0);
        let m = compute_metrics(&v, &t, &[], None).unwrap();
        assert_eq!(m.mttr.mean, None);
        assert_eq!(m.da, 100.0);
        assert_eq!(m.pct, None);
    }

    #[test]
    fn mismatched_logs_are_rejected() {
        let (v, t) = fixture(1, 1, 1, 1);
        assert!(matches!(compute_metrics(&v[..3], &t, &[], None), Err(IntegrityError::LengthMismatch { .. })));
        let mut t2 = t.clone();
        t2[2].0 = 99;
        assert!(matches!(compute_metrics(&v, &t2, &[], None), Err(IntegrityError::StepMismatch { index: 2, .. })));
    }

    #[test]
    fn mttr_excludes_but_counts_unrecovered() {
        let r = [
            Recovery { incident: 0, onset_step: 0, time_to_recover: Some(4), active_steps: 4 },
            Recovery { incident: 1, onset_step: 9, time_to_recover: None, active_steps: 45 },
            Recovery { incident: 2, onset_step: 20, time_to_recover: Some(8), active_steps: 8 },
        ];
        let m = summarize_mttr(&r);
        assert_eq!(m.mean, Some(6.0));
        assert_eq!(m.never_recovered, 1);
        assert_eq!(m.censored_mean, Some(19.0));
    }

    #[test]
    fn pct_on_a_step_curve() {
        let mut curve = vec![0.0; 300];
        curve.extend(vec![10.0; 700]);
        // The trailing mean reaches 9.5 once 95 of its 100 episodes are at 10.
        assert_eq!(policy_convergence(&curve, 100, 0.05), Some(395));
        assert_eq!(policy_convergence(&curve[..50], 100, 0.05), None);
    }

    #[test]
    fn moving_average_matches_direct_means() {
        let curve: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64).collect();
        let ma = moving_average(&curve, 5);
        for (i, m) in ma.iter().enumerate() {
            let direct = curve[i..i + 5].iter().sum::<f64>() / 5.0;
            assert!((m - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_pools_counts() {
        let row = |tp, tn| SeedRow {
            seed: tp,
            metrics: RunMetrics {
                confusion: Confusion { tp, tn, fp: 0, fn_: 10 - tp - tn },
                da: 0.0,
                fpr: 0.0,
                mttr: Mttr::default(),
                pct: None,
            },
            events_sha256: String::new(),
            exogenous_sha256: String::new(),
        };
        let rows = vec![row(2, 6), row(4, 5)];
        let per_seed: Vec<f64> = rows.iter().map(|r| r.metrics.confusion.da()).collect();
        let rep = aggregate(SystemId::StaticIds, rows, &[], "d");
        // Equal window counts per seed, so pooled DA is the mean of per-seed DA.
        assert!((rep.da - (per_seed[0] + per_seed[1]) / 2.0).abs() < 1e-12);
        assert_eq!(rep.pct, None);
    }
}
