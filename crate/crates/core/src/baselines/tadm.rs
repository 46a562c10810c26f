use serde::{Deserialize, Serialize};

use super::iforest::{iforest_fit, iforest_score, FitError, IsolationForest};
use super::pca::{pca_fit, pca_residual, PcaError, PcaModel};
use crate::env::{reset, ActionId, EnvState, PipelineConfig};
use crate::error::{ConfigError, EnvError};
use crate::exec::Execution;
use crate::monitor::{normalize, DetectionVerdict, SignalTriple};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TadmConfig {
    pub n_trees: usize,
    /// Capped at the number of warm-up points.
    pub subsample_size: usize,
    pub theta_if: f64,
    /// Residual threshold is this quantile of the warm-up residuals.
    pub pca_quantile: f64,
    pub pca_components: usize,
    pub warmup_steps: u64,
}

impl Default for TadmConfig {
    fn default() -> Self {
        TadmConfig {
            n_trees: 100,
            subsample_size: 256,
            theta_if: 0.6,
            pca_quantile: 0.95,
            pca_components: 2,
            warmup_steps: 200,
        }
    }
}

impl TadmConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_trees == 0 {
            return Err(ConfigError::new("baselines.tadm.n_trees", "must be positive"));
        }
        if self.subsample_size < 2 {
            return Err(ConfigError::new("baselines.tadm.subsample_size", "must be at least 2"));
        }
        if !(self.theta_if > 0.0 && self.theta_if <= 1.0) {
            return Err(ConfigError::new("baselines.tadm.theta_if", "must lie in (0, 1]"));
        }
        if !(self.pca_quantile > 0.0 && self.pca_quantile <= 1.0) {
            return Err(ConfigError::new("baselines.tadm.pca_quantile", "must lie in (0, 1]"));
        }
        if self.pca_components == 0 || self.pca_components > FEATURES {
            return Err(ConfigError::new("baselines.tadm.pca_components", format!("must lie in 1..={FEATURES}")));
        }
        if (self.warmup_steps as usize) <= self.pca_components.max(1) {
            return Err(ConfigError::new("baselines.tadm.warmup_steps", "too short to fit the models"));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TadmError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("isolation forest: {0}")]
    Forest(#[from] FitError),
    #[error("pca: {0}")]
    Pca(#[from] PcaError),
}

pub const FEATURES: usize = 5;

/// (V, M, L, cpu, mem) for one window.
pub fn tadm_features(signals: SignalTriple, state: &EnvState) -> Vec<f64> {
    vec![signals.vulnerability, signals.metric, signals.log, state.cpu, state.mem]
}

/// Feature points from a benign warm-up episode driven with NO_OP only.
pub fn warmup_points(env: &PipelineConfig, metric_baseline: f64, steps: u64, seed: u64) -> Result<Vec<Vec<f64>>, EnvError> {
    let cfg = PipelineConfig {
        episode_length: steps + 1,
        ..env.benign().with_seed(seed)
    };
    let (mut sim, first) = reset(cfg)?;
    let mut out = vec![tadm_features(normalize(first.events(), metric_baseline), sim.state())];
    while out.len() < steps as usize {
        let o = sim.step(ActionId::NoOp)?;
        out.push(tadm_features(normalize(o.events.events(), metric_baseline), sim.state()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TadmModel {
    center: Vec<f64>,
    scale: Vec<f64>,
    pub forest: IsolationForest,
    pub pca: PcaModel,
    pub theta_if: f64,
    pub theta_pca: f64,
}

impl TadmModel {
    fn standardize(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(x, (c, s))| (x - c) / s)
            .collect()
    }

    /// (isolation score, PCA residual).
    pub fn scores(&self, p: &[f64]) -> Result<(f64, f64), PcaError> {
        let z = self.standardize(p);
        Ok((iforest_score(&self.forest, &z), pca_residual(&self.pca, &z)?))
    }
}

fn quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Fits both detectors on z-scored warm-up points.
pub fn tadm_fit(warmup: &[Vec<f64>], cfg: &TadmConfig, seed: u64, exec: Execution) -> Result<TadmModel, TadmError> {
    let n = warmup.len().max(1) as f64;
    let dim = warmup.first().map_or(0, |p| p.len());
    let center: Vec<f64> = (0..dim).map(|j| warmup.iter().map(|p| p[j]).sum::<f64>() / n).collect();
    let scale: Vec<f64> = (0..dim)
        .map(|j| {
            let var = warmup.iter().map(|p| (p[j] - center[j]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = warmup
        .iter()
        .map(|p| p.iter().enumerate().map(|(j, x)| (x - center[j]) / scale[j]).collect())
        .collect();
    let forest = iforest_fit(&z, cfg.n_trees, cfg.subsample_size.min(z.len()), seed, exec)?;
    let pca = pca_fit(&z, cfg.pca_components)?;
    let residuals = z.iter().map(|p| pca_residual(&pca, p)).collect::<Result<Vec<_>, _>>()?;
    Ok(TadmModel {
        center,
        scale,
        forest,
        pca,
        theta_if: cfg.theta_if,
        theta_pca: quantile(residuals, cfg.pca_quantile),
    })
}

/// Alert when either detector crosses its threshold. `score` carries the
/// isolation score.
pub fn tadm_detect(model: &TadmModel, point: &[f64], step: u64) -> Result<DetectionVerdict, PcaError> {
    let (s_if, r) = model.scores(point)?;
    Ok(DetectionVerdict {
        step,
        alert: s_if >= model.theta_if || r >= model.theta_pca,
        score: s_if,
    })
}
