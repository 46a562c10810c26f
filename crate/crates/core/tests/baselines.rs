use std::time::Instant;

use autoguard::baselines::*;
use autoguard::env::{AttackKind, EventSource, SignatureId, TelemetryEvent};
use autoguard::exec::Execution;
use autoguard::rng::{stream, Domain};
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, Domain::Warmup, &[]);
    (0..n)
        .map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect()
}

#[test]
fn planted_outlier_scores_highest() {
    let mut hits = 0;
    for seed in 0..100 {
        let mut data = gaussian(100, seed);
        data.push(vec![8.0, -8.0]);
        let f = iforest_fit(&data, 100, 64, seed, Execution::Sequential).unwrap();
        let scores: Vec<f64> = data.iter().map(|p| iforest_score(&f, p)).collect();
        let top = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        if top == 100 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "outlier ranked first in {hits}/100");
}

#[test]
fn fit_is_fast() {
    let data = gaussian(1000, 7);
    let t = Instant::now();
    let f = iforest_fit(&data, 100, 256, 7, Execution::Sequential).unwrap();
    let took = t.elapsed();
    assert_eq!(f.trees().len(), 100);
    assert!(took.as_secs_f64() < 1.0, "fit took {took:?}");
}

#[test]
fn residual_vanishes_on_retained_subspace() {
    // 4-D points spanned by two fixed directions plus the mean
    let mut rng = stream(11, Domain::Warmup, &[]);
    let (u, v) = ([1.0, 2.0, 0.0, -1.0], [0.0, 1.0, 3.0, 1.0]);
    let data: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            (0..4).map(|i| 5.0 + a * u[i] + b * v[i]).collect()
        })
        .collect();
    let m = pca_fit(&data, 2).unwrap();
    for p in &data {
        assert!(pca_residual(&m, p).unwrap() < 1e-10);
    }
    let off = vec![5.0 + 1.0, 5.0, 5.0, 5.0 + 1.0];
    assert!(pca_residual(&m, &off).unwrap() > 1e-3);
}

// Rule file parsed independently of the crate's parser.
const RULES: &str = "\
# mixed exact, ranged and thresholded rules
1000
1003,0.8
1101-1104
1202-1202,1.5
9003
";

fn oracle(id: u32, mag: f64) -> bool {
    RULES
        .lines()
        .map(|l| l.split('#').next().unwrap().trim())
        .filter(|l| !l.is_empty())
        .any(|l| {
            let (pat, min) = match l.split_once(',') {
                Some((p, m)) => (p, m.parse::<f64>().unwrap()),
                None => (l, f64::NEG_INFINITY),
            };
            let (lo, hi) = match pat.split_once('-') {
                Some((a, b)) => (a.parse::<u32>().unwrap(), b.parse::<u32>().unwrap()),
                None => (pat.parse().unwrap(), pat.parse().unwrap()),
            };
            lo <= id && id <= hi && mag >= min
        })
}

fn log(id: u32, mag: f64) -> TelemetryEvent {
    TelemetryEvent {
        step: 3,
        source: EventSource::Log,
        signature_id: Some(SignatureId(id)),
        magnitude: mag,
    }
}

#[test]
fn ids_alerts_exactly_on_covered_signatures() {
    let rules: RuleSet = RULES.parse().unwrap();
    for id in 0..=10_000u32 {
        for mag in [0.0, 0.79, 0.8, 1.49, 1.5, 3.0] {
            let v = ids_match(&rules, &[log(id, mag)], 3);
            assert_eq!(v.alert, oracle(id, mag), "signature {id} magnitude {mag}");
        }
    }
}

#[test]
fn default_rules_cover_ninety_percent_of_known_signatures() {
    let rules = RuleSet::default_rules();
    let known = AttackKind::known_signatures();
    let covered = known.iter().filter(|&&s| rules.covers(s)).count();
    assert_eq!(covered, (known.len() as f64 * DEFAULT_RULE_COVERAGE).round() as usize);
    for s in AttackKind::ZeroDayVariant.signature_ids() {
        assert!(!rules.covers(s));
    }
    for id in 0..=10_000u32 {
        let hit = ids_match(&rules, &[log(id, 1.0)], 0).alert;
        assert_eq!(hit, known.contains(&SignatureId(id)) && rules.covers(SignatureId(id)));
    }
}

#[test]
fn unsigned_events_never_alert() {
    let rules = RuleSet::default_rules();
    for source in [EventSource::Log, EventSource::Metric, EventSource::Network, EventSource::Scanner] {
        let e = TelemetryEvent { step: 0, source, signature_id: None, magnitude: 9.0 };
        assert!(!ids_match(&rules, &[e], 0).alert);
    }
}
