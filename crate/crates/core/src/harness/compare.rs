use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::SystemId;
use super::metrics::MetricsReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Metric {
    Da,
    Mttr,
    Fpr,
    Pct,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Da, Metric::Mttr, Metric::Fpr, Metric::Pct];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Da => "DA",
            Metric::Mttr => "MTTR",
            Metric::Fpr => "FPR",
            Metric::Pct => "PCT",
        }
    }

    fn heading(self) -> &'static str {
        match self {
            Metric::Da => "Detection Accuracy (DA, %)",
            Metric::Mttr => "Mean Time to Recovery (MTTR, s)",
            Metric::Fpr => "False Positive Rate (FPR, %)",
            Metric::Pct => "Policy Convergence Time (PCT, episodes)",
        }
    }

    fn higher_is_better(self) -> bool {
        matches!(self, Metric::Da)
    }

    pub fn value(self, r: &MetricsReport) -> Option<f64> {
        match self {
            Metric::Da => Some(r.da),
            Metric::Mttr => r.mttr,
            Metric::Fpr => Some(r.fpr),
            Metric::Pct => r.pct,
        }
    }
}

/// Relative change of `a` against `b`, in percent.
pub fn relative_change(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| (a - b) / b * 100.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: Metric,
    pub values: Vec<(SystemId, Option<f64>)>,
    pub best_baseline: Option<SystemId>,
    /// Relative change of the designated system against the best baseline:
    /// positive is a gain for DA, negative a reduction for the others.
    pub improvement_pct: Option<f64>,
    /// Difference in the metric's own units (percentage points for DA).
    pub absolute_diff: Option<f64>,
    /// Relative change against each baseline separately.
    pub versus: Vec<(SystemId, Option<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub designated: SystemId,
    pub systems: Vec<SystemId>,
    pub metrics: Vec<MetricComparison>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompareError {
    #[error("need at least two reports, got {0}")]
    TooFew(usize),
    #[error("no report for {0}")]
    Missing(SystemId),
}

pub fn compare(reports: &[MetricsReport], designated: SystemId) -> Result<Comparison, CompareError> {
    if reports.len() < 2 {
        return Err(CompareError::TooFew(reports.len()));
    }
    let main = reports
        .iter()
        .find(|r| r.system == designated)
        .ok_or(CompareError::Missing(designated))?;
    let others: Vec<&MetricsReport> = reports.iter().filter(|r| r.system != designated).collect();
    let metrics = Metric::ALL
        .iter()
        .map(|&m| {
            let a = m.value(main);
            let best = others
                .iter()
                .filter_map(|r| m.value(r).map(|v| (r.system, v)))
                .reduce(|x, y| {
                    let better = if m.higher_is_better() { y.1 > x.1 } else { y.1 < x.1 };
                    if better {
                        y
                    } else {
                        x
                    }
                });
            let improvement_pct = a.zip(best).and_then(|(a, (_, b))| relative_change(a, b));
            let absolute_diff = a.zip(best).map(|(a, (_, b))| a - b);
            MetricComparison {
                metric: m,
                values: reports.iter().map(|r| (r.system, m.value(r))).collect(),
                best_baseline: best.map(|b| b.0),
                improvement_pct,
                absolute_diff,
                versus: others
                    .iter()
                    .map(|r| (r.system, a.zip(m.value(r)).and_then(|(a, b)| relative_change(a, b))))
                    .collect(),
            }
        })
        .collect();
    Ok(Comparison {
        designated,
        systems: reports.iter().map(|r| r.system).collect(),
        metrics,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".into(), |v| format!("{v:.1}"))
}

fn signed(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".into(), |v| format!("{v:+.1}"))
}

impl Comparison {
    /// Rows are metrics, columns are systems followed by the improvement of
    /// the designated system over the best baseline.
    pub fn to_table(&self) -> String {
        let mut head = vec!["Metric".to_string()];
        head.extend(self.systems.iter().map(|s| s.label().to_string()));
        head.push("Improvement (%)".into());
        let mut rows = vec![head];
        for m in &self.metrics {
            let mut r = vec![m.metric.heading().to_string()];
            r.extend(m.values.iter().map(|(_, v)| cell(*v)));
            r.push(signed(m.improvement_pct));
            rows.push(r);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, r) in rows.iter().enumerate() {
            let line: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
            if i == 0 {
                writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))).unwrap();
            }
        }
        if let Some(da) = self.metrics.iter().find(|m| m.metric == Metric::Da) {
            if let (Some(best), Some(abs)) = (da.best_baseline, da.absolute_diff) {
                writeln!(out, "\nDA vs {}: {:+.1} points absolute, {} % relative", best.label(), abs, signed(da.improvement_pct)).unwrap();
            }
        }
        for m in &self.metrics {
            let parts: Vec<String> = m
                .versus
                .iter()
                .filter(|(_, v)| v.is_some())
                .map(|(s, v)| format!("vs {} {}%", s.label(), signed(*v)))
                .collect();
            if !parts.is_empty() {
                writeln!(out, "{} change: {}", m.metric.name(), parts.join(", ")).unwrap();
            }
        }
        out
    }

    /// `metric,system,value,improvement_pct`: the designated system's row
    /// carries its change against the best baseline, each baseline's row the
    /// designated system's change against that baseline.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "system", "value", "improvement_pct"])?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        for m in &self.metrics {
            for (s, v) in &m.values {
                let imp = if *s == self.designated {
                    m.improvement_pct
                } else {
                    m.versus.iter().find(|(x, _)| x == s).and_then(|(_, v)| *v)
                };
                out.write_record([m.metric.name(), s.name(), &opt(*v), &opt(imp)])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::Confusion;

    fn report(system: SystemId, da: f64, mttr: f64, fpr: f64, pct: Option<f64>) -> MetricsReport {
        MetricsReport {
            system,
            da,
            fpr,
            mttr: Some(mttr),
            mttr_never_recovered: 0,
            mttr_censored: Some(mttr),
            pct,
            confusion: Confusion::default(),
            seeds: vec![1],
            config_digest: String::new(),
            per_seed: vec![],
        }
    }

    fn table2() -> Vec<MetricsReport> {
        vec![
            report(SystemId::Autoguard, 95.6, 87.0, 6.4, Some(2000.0)),
            report(SystemId::StaticIds, 72.8, 145.0, 11.3, None),
            report(SystemId::Tadm, 77.5, 132.0, 9.7, None),
        ]
    }

    fn get(c: &Comparison, m: Metric) -> &MetricComparison {
        c.metrics.iter().find(|x| x.metric == m).unwrap()
    }

    #[test]
    fn da_relative_and_absolute() {
        let c = compare(&table2(), SystemId::Autoguard).unwrap();
        let da = get(&c, Metric::Da);
        assert_eq!(da.best_baseline, Some(SystemId::Tadm));
        assert!((da.improvement_pct.unwrap() - 23.354).abs() < 1e-3);
        assert!((da.absolute_diff.unwrap() - 18.1).abs() < 1e-9);
    }

    #[test]
    fn mttr_reduction_against_each_baseline() {
        let c = compare(&table2(), SystemId::Autoguard).unwrap();
        let m = get(&c, Metric::Mttr);
        let vs = |s| m.versus.iter().find(|(x, _)| *x == s).unwrap().1.unwrap();
        assert!((vs(SystemId::StaticIds) + 40.0).abs() < 0.05);
        assert!((vs(SystemId::Tadm) + 34.1).abs() < 0.05);
        assert_eq!(m.best_baseline, Some(SystemId::Tadm));
        assert_eq!(get(&c, Metric::Pct).improvement_pct, None);
    }

    #[test]
    fn identical_reports_show_no_change() {
        let a = report(SystemId::Autoguard, 80.0, 20.0, 5.0, None);
        let b = MetricsReport { system: SystemId::Tadm, ..a.clone() };
        let c = compare(&[a, b], SystemId::Autoguard).unwrap();
        for m in &c.metrics {
            if m.metric != Metric::Pct {
                assert_eq!(m.improvement_pct, Some(0.0));
            }
        }
    }

    #[test]
    fn needs_two_reports() {
        assert_eq!(compare(&table2()[..1], SystemId::Autoguard), Err(CompareError::TooFew(1)));
    }

    #[test]
    fn table_layout_and_csv() {
        let c = compare(&table2(), SystemId::Autoguard).unwrap();
        let t = c.to_table();
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].starts_with("Metric"));
        assert!(lines[0].contains("AutoGuard") && lines[0].ends_with("Improvement (%)"));
        assert!(lines[2].starts_with("Detection Accuracy") && lines[2].ends_with("+23.4"));
        assert!(lines[5].contains("N/A"));
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("metric,system,value,improvement_pct\n"));
        assert_eq!(s.lines().count(), 1 + 4 * 3);
        assert!(s.contains("PCT,STATIC_IDS,,"));
    }
}
