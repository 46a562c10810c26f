//! Comparison detectors: signature rules and an isolation-forest + PCA
//! anomaly model, each with a fixed remediation rule.

mod ids;
mod iforest;
mod pca;
mod remediate;
mod tadm;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub use ids::{ids_match, Rule, RuleParseError, RuleSet, SignaturePattern, DEFAULT_RULE_COVERAGE};
pub use iforest::{c_factor, iforest_fit, iforest_score, score_from_path, FitError, ITree, IsolationForest};
pub use pca::{pca_fit, pca_residual, PcaError, PcaModel};
pub use remediate::{baseline_remediate, BaselineKind, Cooldown};
pub use tadm::{tadm_detect, tadm_features, tadm_fit, warmup_points, TadmConfig, TadmError, TadmModel, FEATURES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselinesConfig {
    /// Rule file for the static IDS; the built-in rules when absent.
    pub rules_file: Option<std::path::PathBuf>,
    pub tadm: TadmConfig,
    pub cooldown_steps: u64,
}

impl Default for BaselinesConfig {
    fn default() -> Self {
        BaselinesConfig {
            rules_file: None,
            tadm: TadmConfig::default(),
            cooldown_steps: 3,
        }
    }
}

impl BaselinesConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.tadm.validate()
    }
}
