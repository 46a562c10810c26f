use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::compare::compare;
use super::config::{ExperimentConfig, SystemId};
use super::metrics::{policy_convergence, MetricsReport, SeedRow, PCT_BAND, PCT_WINDOW};
use super::runner::{load_rules, reports_for, run_one, Experiment, HarnessError, RunArtifacts};
use crate::agent::{CurvePoint, QTable};
use crate::env::log::write_jsonl;
use crate::env::GroundTruth;

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, v: &T) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| io_err(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| io_err(path, e))
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    write_jsonl(&mut w, items).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

pub fn run_dir_name(system: SystemId, seed: u64) -> String {
    format!("{}_seed{seed}", system.name().to_ascii_lowercase())
}

/// Contents of `run.json` in each run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub system: SystemId,
    #[serde(flatten)]
    pub row: SeedRow,
}

#[derive(Serialize, Deserialize)]
struct EventLabel {
    #[serde(flatten)]
    truth: GroundTruth,
}

pub fn write_qtable(path: &Path, q: &QTable) -> Result<(), HarnessError> {
    let w = create(path)?;
    q.write_csv(w).map_err(|e| io_err(path, e))
}

pub fn read_qtable(path: &Path, cfg: &ExperimentConfig) -> Result<QTable, HarnessError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    QTable::read_csv(BufReader::new(f), cfg.agent.bins).map_err(|e| io_err(path, e))
}

pub fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    if curve.is_empty() {
        w.write_record(["episode", "total_reward", "epsilon"]).map_err(|e| io_err(path, e))?;
    }
    for p in curve {
        w.serialize(p).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>, HarnessError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    csv::Reader::from_reader(f)
        .deserialize()
        .collect::<Result<Vec<CurvePoint>, _>>()
        .map_err(|e| io_err(path, e))
}

/// Writes one run's logs into `dir`.
pub fn write_run(dir: &Path, run: &RunArtifacts) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let events = run.events_jsonl();
    fs::write(dir.join("events.jsonl"), &events).map_err(|e| io_err(dir, e))?;
    let labels: Vec<EventLabel> = run.event_truth.iter().map(|t| EventLabel { truth: *t }).collect();
    write_lines(&dir.join("events.truth.jsonl"), &labels)?;
    write_lines(&dir.join("windows.jsonl"), &run.windows)?;
    write_lines(&dir.join("healing.jsonl"), &run.healing)?;
    write_lines(&dir.join("incidents.jsonl"), &run.incidents)?;
    if let Some(t) = &run.trained {
        write_qtable(&dir.join("qtable.csv"), &t.q)?;
        if !t.curve.is_empty() {
            write_curve(&dir.join("learning_curve.csv"), &t.curve)?;
        }
    }
    write_json(&dir.join("run.json"), &RunSummary { system: run.system, row: run.seed_row() })
}

/// Writes `config.json`, `metrics.json`, the comparison table and every
/// run directory under `out`.
pub fn write_experiment(out: &Path, cfg: &ExperimentConfig, exp: &Experiment) -> Result<(), HarnessError> {
    fs::create_dir_all(out.join("runs")).map_err(|e| io_err(out, e))?;
    write_json(&out.join("config.json"), cfg)?;
    write_json(&out.join("metrics.json"), &exp.reports)?;
    for run in &exp.runs {
        write_run(&out.join("runs").join(run_dir_name(run.system, run.seed)), run)?;
    }
    write_comparison(out, &exp.reports).map(|_| ())
}

/// comparison.txt and comparison.csv, when there is something to compare.
pub fn write_comparison(out: &Path, reports: &[MetricsReport]) -> Result<Option<String>, HarnessError> {
    let designated = if reports.iter().any(|r| r.system == SystemId::Autoguard) {
        SystemId::Autoguard
    } else {
        match reports.first() {
            Some(r) => r.system,
            None => return Ok(None),
        }
    };
    let Ok(c) = compare(reports, designated) else {
        return Ok(None);
    };
    let table = c.to_table();
    fs::write(out.join("comparison.txt"), &table).map_err(|e| io_err(out, e))?;
    let p = out.join("comparison.csv");
    c.write_csv(create(&p)?).map_err(|e| io_err(&p, e))?;
    Ok(Some(table))
}

pub fn read_reports(path: &Path) -> Result<Vec<MetricsReport>, HarnessError> {
    read_json(path)
}

fn file_sha256(path: &Path) -> Result<String, HarnessError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplayCheck {
    pub system: SystemId,
    pub seed: u64,
    pub recorded_sha256: String,
    pub file_sha256: String,
    pub replayed_sha256: String,
    pub metrics_match: bool,
    pub qtable_match: Option<bool>,
}

impl ReplayCheck {
    pub fn ok(&self) -> bool {
        self.recorded_sha256 == self.file_sha256
            && self.file_sha256 == self.replayed_sha256
            && self.metrics_match
            && self.qtable_match != Some(false)
    }
}

#[derive(Clone, Debug)]
pub struct ReplayReport {
    pub checks: Vec<ReplayCheck>,
    /// Set when every run was replayed: whether the aggregate reports
    /// rebuilt from the replays equal `metrics.json`.
    pub reports_match: Option<bool>,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(ReplayCheck::ok) && self.reports_match != Some(false)
    }
}

fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let runs = dir.join("runs");
    let mut v: Vec<PathBuf> = fs::read_dir(&runs)
        .map_err(|e| io_err(&runs, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("run.json").is_file())
        .collect();
    v.sort();
    Ok(v)
}

/// Re-runs recorded runs from `dir` and checks they reproduce the logged
/// event stream and metrics. AutoGuard runs reuse the recorded Q-table
/// unless `retrain` is set, in which case training is repeated and the
/// table compared too.
pub fn replay(dir: &Path, only: Option<(SystemId, u64)>, retrain: bool) -> Result<ReplayReport, HarnessError> {
    let cfg: ExperimentConfig = read_json(&dir.join("config.json"))?;
    cfg.validate()?;
    let rules = load_rules(&cfg)?;
    let mut targets = Vec::new();
    for d in run_dirs(dir)? {
        let s: RunSummary = read_json(&d.join("run.json"))?;
        if only.is_none_or(|(sys, seed)| sys == s.system && seed == s.row.seed) {
            targets.push((d, s));
        }
    }
    if let Some((sys, seed)) = only {
        if targets.is_empty() {
            return Err(HarnessError::Io(format!("no run for {sys} seed {seed} under {}", dir.display())));
        }
    }
    let results = cfg.execution.map(targets, |(d, s)| -> Result<(ReplayCheck, RunArtifacts), HarnessError> {
        let stored_q = if s.system == SystemId::Autoguard {
            Some(read_qtable(&d.join("qtable.csv"), &cfg)?)
        } else {
            None
        };
        let mut run = run_one(&cfg, s.system, s.row.seed, &rules, if retrain { None } else { stored_q.clone() })?;
        if s.system == SystemId::Autoguard && !retrain {
            let curve_path = d.join("learning_curve.csv");
            if curve_path.is_file() {
                let curve: Vec<f64> = read_curve(&curve_path)?.iter().map(|p| p.total_reward).collect();
                run.metrics.pct = policy_convergence(&curve, PCT_WINDOW, PCT_BAND);
            }
        }
        let qtable_match = match (&stored_q, retrain) {
            (Some(q), true) => Some(run.trained.as_ref().is_some_and(|t| &t.q == q)),
            _ => None,
        };
        let check = ReplayCheck {
            system: s.system,
            seed: s.row.seed,
            recorded_sha256: s.row.events_sha256.clone(),
            file_sha256: file_sha256(&d.join("events.jsonl"))?,
            replayed_sha256: run.events_sha256(),
            metrics_match: run.metrics == s.row.metrics && run.exogenous_sha256 == s.row.exogenous_sha256,
            qtable_match,
        };
        Ok((check, run))
    });
    let mut checks = Vec::new();
    let mut runs = Vec::new();
    for r in results {
        let (c, run) = r?;
        checks.push(c);
        runs.push(run);
    }
    let reports_match = if only.is_none() {
        let stored = read_reports(&dir.join("metrics.json"))?;
        Some(reports_for(&cfg, &runs) == stored)
    } else {
        None
    };
    Ok(ReplayReport { checks, reports_match })
}
