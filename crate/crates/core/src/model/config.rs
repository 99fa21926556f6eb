//! Scenario files.
//!
//! A scenario is a TOML document with a mandatory `[scenario]` section and
//! optional per-policy sections (`[risk]`, `[dql]`, `[drs]`, `[objective]`,
//! `[train]`) that fall back to the built-in defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EnergyProfile, TaskType};
use crate::error::{Error, Result};
use crate::metrics::ObjectiveParams;
use crate::neural::TrainConfig;
use crate::policies::{DqlRewardParams, DrsParams};
use crate::risk::RiskParams;
use crate::simcore::LinkDelayModel;

/// How a task type's mean inter-arrival time is applied to the IoT devices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalScope {
    /// Every device generates the type at rate λ.
    #[default]
    PerDevice,
    /// λ is the network-wide rate; each device generates at λ / X.
    Network,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_iot: usize,
    pub num_uav: usize,
    pub num_mec: usize,
    pub task_types: Vec<TaskType>,
    /// Arrival horizon in seconds.
    pub sim_duration: f64,
    /// Receiving UAV per IoT device; contiguous blocks when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iot_assignment: Option<Vec<usize>>,
    pub link_delays: LinkDelayModel,
    pub energy_profiles: Vec<EnergyProfile>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub arrival_scope: ArrivalScope,
    /// Seconds per unit of the energy profile's time base.
    #[serde(default = "default_seconds_per_hour")]
    pub seconds_per_hour: f64,
}

fn default_seconds_per_hour() -> f64 {
    3600.0
}

/// Contiguous balanced blocks: device `i` goes to UAV `i · J / X`.
pub fn default_iot_assignment(num_iot: usize, num_uav: usize) -> Vec<usize> {
    (0..num_iot).map(|i| i * num_uav / num_iot.max(1)).collect()
}

impl ScenarioConfig {
    pub fn num_nodes(&self) -> usize {
        self.num_uav + self.num_mec
    }

    pub fn receiver_of(&self, iot: usize) -> usize {
        match &self.iot_assignment {
            Some(map) => map[iot],
            None => iot * self.num_uav / self.num_iot.max(1),
        }
    }

    /// Mean inter-arrival time of `task_type` at a single device.
    pub fn device_mean_interarrival(&self, task_type: &TaskType) -> f64 {
        match self.arrival_scope {
            ArrivalScope::PerDevice => task_type.mean_interarrival,
            ArrivalScope::Network => task_type.mean_interarrival * self.num_iot as f64,
        }
    }

    /// Expected number of generated tasks per run.
    pub fn expected_task_count(&self) -> f64 {
        self.task_types
            .iter()
            .map(|t| self.num_iot as f64 * self.sim_duration / self.device_mean_interarrival(t))
            .sum()
    }

    pub fn max_deadline(&self) -> f64 {
        self.task_types
            .iter()
            .map(|t| t.deadline)
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_uav == 0 {
            return Err(Error::config("num_uav must be at least 1"));
        }
        if self.num_mec == 0 {
            return Err(Error::config("num_mec must be at least 1"));
        }
        if self.task_types.is_empty() {
            return Err(Error::config("at least one task type is required"));
        }
        for t in &self.task_types {
            t.validate()?;
        }
        if !(self.sim_duration >= 0.0 && self.sim_duration.is_finite()) {
            return Err(Error::config("sim_duration must be finite and >= 0"));
        }
        if let Some(map) = &self.iot_assignment {
            if map.len() != self.num_iot {
                return Err(Error::config(format!(
                    "iot_assignment has {} entries for {} IoT devices",
                    map.len(),
                    self.num_iot
                )));
            }
            if let Some(bad) = map.iter().find(|&&j| j >= self.num_uav) {
                return Err(Error::config(format!(
                    "iot_assignment maps to UAV {bad} but only {} UAVs exist",
                    self.num_uav
                )));
            }
        }
        self.link_delays.validate()?;
        if self.energy_profiles.len() != self.num_uav {
            return Err(Error::config(format!(
                "{} energy profiles for {} UAVs",
                self.energy_profiles.len(),
                self.num_uav
            )));
        }
        for p in &self.energy_profiles {
            p.validate()?;
        }
        if !(self.seconds_per_hour > 0.0 && self.seconds_per_hour.is_finite()) {
            return Err(Error::config("seconds_per_hour must be finite and > 0"));
        }
        Ok(())
    }
}

/// A complete scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub risk: RiskParams,
    #[serde(default)]
    pub dql: DqlRewardParams,
    #[serde(default)]
    pub drs: DrsParams,
    #[serde(default)]
    pub objective: ObjectiveParams,
    #[serde(default)]
    pub train: TrainConfig,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.risk.validate()?;
        self.dql.validate()?;
        self.drs.validate()?;
        self.objective.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// The four-UAV, one-MEC, sixteen-device smart-farm scenario.
    pub fn paper_default() -> Self {
        Self::from_toml_str(include_str!("../../../../scenarios/paper_s4.cfg"))
            .expect("bundled scenario is valid")
    }
}
