//! Run configuration file (TOML) and its hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::agents::{A3cConfig, AgentConfigs, PpoConfig, Td3Config};
use crate::baseline::{Axis, GridSpec, DEFAULT_GRID_CAP};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::network::SystemConfig;
use crate::ris::RisMode;
use crate::sweep::SweepConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Desk-scale episode budget.
    pub episodes: usize,
    /// Episode budget used with `--paper-scale`.
    pub paper_episodes: usize,
    /// Checkpoint cadence in episodes; 0 saves only at the end.
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            episodes: 2000,
            paper_episodes: 30000,
            checkpoint_every: 0,
        }
    }
}

/// Settings for the `oracle` subcommand: the system section is reduced to
/// one antenna, one element and one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub steps: usize,
    /// Resolution of the time-split axis, which dominates the optimum.
    pub tau_steps: usize,
    pub mode: RisMode,
    pub seed: u64,
    pub cap: u64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            steps: 5,
            tau_steps: 65,
            mode: RisMode::Active,
            seed: 1,
            cap: DEFAULT_GRID_CAP,
        }
    }
}

impl OracleSection {
    pub fn grid(&self, sys: &SystemConfig) -> GridSpec {
        let mut spec = GridSpec::uniform(sys, self.mode, self.steps);
        spec.tau = Axis::span(0.0, 1.0, self.tau_steps);
        spec.cap = self.cap;
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    /// Random-search samples per channel.
    pub budget: usize,
    /// Channels drawn per seed.
    pub channels: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            budget: 10_000,
            channels: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub system: SystemConfig,
    pub env: EnvConfig,
    pub train: TrainSection,
    pub ppo: PpoConfig,
    pub td3: Td3Config,
    pub a3c: A3cConfig,
    pub oracle: OracleSection,
    pub baseline: BaselineSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3],
            output_dir: PathBuf::from("out"),
            system: SystemConfig::default(),
            env: EnvConfig::default(),
            train: TrainSection::default(),
            ppo: PpoConfig::default(),
            td3: Td3Config::default(),
            a3c: A3cConfig::default(),
            oracle: OracleSection::default(),
            baseline: BaselineSection::default(),
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            what: "run config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            what: "run config".into(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.system.validate()?;
        self.env.validate()?;
        self.agents().validate()?;
        if self.oracle.steps == 0 || self.oracle.tau_steps == 0 {
            return Err(Error::Config("oracle steps must be >= 1".into()));
        }
        if self.baseline.budget == 0 || self.baseline.channels == 0 {
            return Err(Error::Config("baseline budget and channels must be >= 1".into()));
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate(&self.system)?;
        }
        Ok(())
    }

    pub fn agents(&self) -> AgentConfigs {
        AgentConfigs {
            ppo: self.ppo.clone(),
            td3: self.td3.clone(),
            a3c: self.a3c.clone(),
        }
    }

    pub fn episodes(&self, paper_scale: bool) -> usize {
        if paper_scale {
            self.train.paper_episodes
        } else {
            self.train.episodes
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }
}
