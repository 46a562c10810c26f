use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::AgentConfig;
use crate::baselines::BaselinesConfig;
use crate::env::PipelineConfig;
use crate::error::ConfigError;
use crate::exec::Execution;
use crate::healing::HealingConfig;
use crate::monitor::MonitorConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SystemId {
    Autoguard,
    StaticIds,
    Tadm,
}

impl SystemId {
    pub const ALL: [SystemId; 3] = [SystemId::Autoguard, SystemId::StaticIds, SystemId::Tadm];

    pub fn name(self) -> &'static str {
        match self {
            SystemId::Autoguard => "AUTOGUARD",
            SystemId::StaticIds => "STATIC_IDS",
            SystemId::Tadm => "TADM",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SystemId::Autoguard => "AutoGuard",
            SystemId::StaticIds => "Static IDS",
            SystemId::Tadm => "TADM",
        }
    }

    pub fn parse(s: &str) -> Option<SystemId> {
        Self::ALL.into_iter().find(|x| x.name().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for SystemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: PipelineConfig,
    pub monitor: MonitorConfig,
    pub agent: AgentConfig,
    pub healing: HealingConfig,
    pub baselines: BaselinesConfig,
    pub systems: Vec<SystemId>,
    pub evaluation_episodes: u64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: PipelineConfig::default(),
            monitor: MonitorConfig::default(),
            agent: AgentConfig::default(),
            healing: HealingConfig::default(),
            baselines: BaselinesConfig::default(),
            systems: SystemId::ALL.to_vec(),
            evaluation_episodes: 10,
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: PathBuf::from("runs/default"),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.systems.is_empty() {
            return Err(ConfigError::new("systems", "must name at least one system"));
        }
        let mut s = self.systems.clone();
        s.sort();
        s.dedup();
        if s.len() != self.systems.len() {
            return Err(ConfigError::new("systems", "lists a system twice"));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::new("seeds", "must list at least one seed"));
        }
        if self.evaluation_episodes == 0 {
            return Err(ConfigError::new("evaluation_episodes", "must be positive"));
        }
        self.env.validate()?;
        self.monitor.validate()?;
        self.agent.validate()?;
        self.healing.validate()?;
        self.baselines.validate()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.into(), source })?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|source| LoadError::Parse { path: path.into(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form. Execution mode and output
    /// location do not change results and are left out.
    pub fn digest(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("execution");
            m.remove("output_dir");
        }
        let bytes = serde_json::to_vec(&v).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string_pretty(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
    }

    #[test]
    fn empty_object_is_the_default() {
        let c: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sedes":[1]}"#).is_err());
    }

    #[test]
    fn empty_systems_rejected() {
        let c = ExperimentConfig { systems: vec![], ..Default::default() };
        assert_eq!(c.validate().unwrap_err().field, "systems");
    }
}
