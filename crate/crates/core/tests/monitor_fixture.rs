use autoguard::env::TelemetryEvent;
use autoguard::monitor::{normalize, risk_score, RiskWeights};

const FIXTURE: &str = include_str!("fixtures/mixed_batch.jsonl");

// Counts straight from the raw JSON, without the crate's event types.
fn oracle(text: &str, baseline: f64) -> (f64, f64, f64) {
    let (mut v, mut m, mut l) = (0.0, 0.0, 0.0);
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let e: serde_json::Value = serde_json::from_str(line).unwrap();
        let mag = e["magnitude"].as_f64().unwrap();
        match e["source"].as_str().unwrap() {
            "SCANNER" => v += mag,
            "METRIC" if mag > baseline => m += mag,
            "LOG" if !e["signature_id"].is_null() => l += 1.0,
            _ => {}
        }
    }
    (v, m, l)
}

fn events() -> Vec<TelemetryEvent> {
    FIXTURE
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn fixture_matches_hand_count() {
    let ev = events();
    assert_eq!(ev.len(), 13);
    for baseline in [0.0, 0.5, 1.0, 2.0, 5.0] {
        let s = normalize(&ev, baseline);
        let (v, m, l) = oracle(FIXTURE, baseline);
        assert!((s.vulnerability - v).abs() < 1e-12);
        assert!((s.metric - m).abs() < 1e-12, "baseline {baseline}");
        assert_eq!(s.log, l);
    }
    // at the default baseline: 2.84+0.35, 2.31+1.75 (1.0 itself is not above), three signed logs
    let s = normalize(&ev, 1.0);
    assert!((s.vulnerability - 3.19).abs() < 1e-12);
    assert!((s.metric - 4.06).abs() < 1e-12);
    assert_eq!(s.log, 3.0);
}

#[test]
fn split_batches_add_up() {
    let ev = events();
    for cut in 0..=ev.len() {
        let (a, b) = ev.split_at(cut);
        let (x, y, z) = (normalize(a, 1.0), normalize(b, 1.0), normalize(&ev, 1.0));
        assert!((x.vulnerability + y.vulnerability - z.vulnerability).abs() < 1e-12);
        assert!((x.metric + y.metric - z.metric).abs() < 1e-12);
        assert_eq!(x.log + y.log, z.log);
    }
}

#[test]
fn fixture_risk_is_high() {
    let rho = risk_score(normalize(&events(), 1.0), RiskWeights::default());
    let x: f64 = 0.5 * 3.19 + 0.3 * 4.06 + 0.2 * 3.0;
    assert!((rho - 1.0 / (1.0 + (-x).exp())).abs() < 1e-12);
}
