//! Experiment runner, metrics, comparison and run-directory I/O.

mod compare;
mod config;
mod io;
mod metrics;
mod runner;

pub use compare::{compare, relative_change, CompareError, Comparison, Metric, MetricComparison};
pub use config::{ExperimentConfig, LoadError, SystemId};
pub use io::{
    read_curve, read_qtable, read_reports, replay, run_dir_name, write_comparison, write_curve, write_experiment,
    write_qtable, write_run, ReplayCheck, ReplayReport, RunSummary,
};
pub use metrics::{
    aggregate, compute_metrics, confusion, moving_average, policy_convergence, recoveries, summarize_mttr, Confusion,
    IntegrityError, MetricsReport, Mttr, Recovery, RunMetrics, SeedRow, PCT_BAND, PCT_WINDOW,
};
pub use runner::{
    eval_episode_seed, evaluate_run, fit_tadm, load_rules, reports_for, run_experiment, run_one, train_agent,
    Experiment, HarnessError, RunArtifacts, RunError, WindowRecord,
};
