use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use autoguard::harness::{
    read_reports, replay, run_dir_name, run_experiment, train_agent, write_comparison, write_curve, write_experiment,
    write_qtable, ExperimentConfig, SystemId,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "autoguard", version, about = "Self-healing DevSecOps pipeline simulator and benchmark")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (JSON). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run this single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monitor and decide but never remediate.
    #[arg(long, global = true)]
    observe_only: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the Q-learning agent and write qtable.csv and learning_curve.csv per seed.
    Train,
    /// Run every configured system and write metrics.json plus per-run logs.
    Evaluate,
    /// Merge metrics.json files into a comparison table (text and CSV).
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Re-run recorded runs and check the event-log hash and metrics.
    Replay {
        run_dir: PathBuf,
        /// Only replay this system (AUTOGUARD, STATIC_IDS, TADM); needs --seed.
        #[arg(long)]
        system: Option<String>,
        /// Repeat training instead of loading the recorded Q-table.
        #[arg(long)]
        retrain: bool,
    },
    /// Print the default configuration.
    DefaultConfig,
}

/// Usage and configuration problems exit with 2, run failures with 1.
enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

fn load(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if g.observe_only {
        cfg.healing.enabled = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(cfg: &ExperimentConfig) -> Result<()> {
    let out = cfg.output_dir.clone();
    let trained = cfg.execution.map(cfg.seeds.clone(), |seed| (seed, train_agent(cfg, seed)));
    for (seed, t) in trained {
        let t = t.with_context(|| format!("training seed {seed}"))?;
        let dir = out.join(run_dir_name(SystemId::Autoguard, seed));
        std::fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
        write_qtable(&dir.join("qtable.csv"), &t.q)?;
        write_curve(&dir.join("learning_curve.csv"), &t.curve)?;
        let curve: Vec<f64> = t.curve.iter().map(|p| p.total_reward).collect();
        let pct = autoguard::harness::policy_convergence(&curve, 100, 0.05);
        println!(
            "seed {seed}: {} episodes, PCT {}, wrote {}",
            t.curve.len(),
            pct.map_or("N/A".into(), |p| p.to_string()),
            dir.display()
        );
    }
    Ok(())
}

fn evaluate(cfg: &ExperimentConfig) -> Result<()> {
    let exp = run_experiment(cfg)?;
    write_experiment(&cfg.output_dir, cfg, &exp)?;
    for r in &exp.reports {
        println!(
            "{:<10} DA {:6.2}%  FPR {:6.2}%  MTTR {}  never recovered {}  PCT {}",
            r.system.name(),
            r.da,
            r.fpr,
            r.mttr.map_or("N/A".into(), |m| format!("{m:.2}s")),
            r.mttr_never_recovered,
            r.pct.map_or("N/A".into(), |p| format!("{p:.0}")),
        );
    }
    if let Ok(text) = std::fs::read_to_string(cfg.output_dir.join("comparison.txt")) {
        println!("\n{text}");
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn compare_files(files: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut reports = Vec::new();
    for f in files {
        reports.extend(read_reports(f)?);
    }
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| files[0].parent().map(Path::to_path_buf))
        .unwrap_or_default();
    std::fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
    match write_comparison(&dir, &reports)? {
        Some(table) => {
            print!("{table}");
            Ok(())
        }
        None => bail!("need at least two system reports to compare, got {}", reports.len()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match cli.cmd {
        Cmd::DefaultConfig => {
            println!("{}", serde_json::to_string_pretty(&ExperimentConfig::default()).map_err(|e| Failure::Run(e.into()))?);
            Ok(())
        }
        Cmd::Train => {
            let cfg = load(g).map_err(Failure::Usage)?;
            train(&cfg).map_err(Failure::Run)
        }
        Cmd::Evaluate => {
            let cfg = load(g).map_err(Failure::Usage)?;
            evaluate(&cfg).map_err(Failure::Run)
        }
        Cmd::Compare { reports } => compare_files(&reports, g.out.as_deref()).map_err(Failure::Run),
        Cmd::Replay { run_dir, system, retrain } => {
            let only = match (system, g.seed) {
                (Some(s), Some(seed)) => {
                    let sys = SystemId::parse(&s).ok_or_else(|| Failure::Usage(anyhow::anyhow!("unknown system {s}")))?;
                    Some((sys, seed))
                }
                (Some(_), None) => return Err(Failure::Usage(anyhow::anyhow!("--system needs --seed"))),
                (None, _) => None,
            };
            let report = replay(&run_dir, only, retrain).map_err(|e| Failure::Run(e.into()))?;
            for c in &report.checks {
                println!(
                    "{} {:<10} seed {:<4} events {} metrics {}",
                    if c.ok() { "OK  " } else { "FAIL" },
                    c.system.name(),
                    c.seed,
                    if c.recorded_sha256 == c.file_sha256 && c.file_sha256 == c.replayed_sha256 {
                        &c.replayed_sha256[..16]
                    } else {
                        "MISMATCH"
                    },
                    if c.metrics_match { "match" } else { "MISMATCH" },
                );
            }
            if let Some(m) = report.reports_match {
                println!("metrics.json {}", if m { "reproduced" } else { "MISMATCH" });
            }
            if report.ok() {
                Ok(())
            } else {
                Err(Failure::Run(anyhow::anyhow!("replay did not reproduce the recorded run")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            eprintln!("run `autoguard --help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
