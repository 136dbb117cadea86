//! Experiment configuration, read from TOML. Every section and field is
//! optional; omitted values take the documented defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentCalibration, SubjectProfile};
use crate::control::{ControllerGains, PreviewConfig};
use crate::dynamics::{VehicleParams, DEFAULT_DT};
use crate::error::{ensure_positive, Error, Result};
use crate::scenario::ScenarioConfig;
use crate::stats::ComparisonPolicy;

/// Origin of the response-time measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Epoch {
    /// Pedestrian spawn (t = 0).
    #[default]
    Spawn,
    /// Start of the trial.
    TrialStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed for the subject population.
    pub seed: u64,
    /// Simulation and sampling step, s.
    pub dt: f64,
    pub epoch: Epoch,
    pub vehicle: VehicleParams,
    pub gains: ControllerGains,
    pub preview: PreviewConfig,
    pub scenario: ScenarioConfig,
    pub agents: AgentCalibration,
    pub policy: ComparisonPolicy,
    /// Explicit subject set; generated from `seed` when empty.
    pub profiles: Vec<SubjectProfile>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            dt: DEFAULT_DT,
            epoch: Epoch::Spawn,
            vehicle: VehicleParams::default(),
            gains: ControllerGains::default(),
            preview: PreviewConfig::default(),
            scenario: ScenarioConfig::default(),
            agents: AgentCalibration::default(),
            policy: ComparisonPolicy::default(),
            profiles: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("dt", self.dt)?;
        self.vehicle.validate()?;
        self.gains.validate()?;
        self.preview.validate()?;
        self.scenario.validate()?;
        self.agents.validate()?;
        self.policy.validate()?;
        for p in &self.profiles {
            p.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML serialisation, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}
