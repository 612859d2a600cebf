//! Environment specifications and their JSON configuration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::GridParams;
use super::observe::{CommConfig, ObservationMode, ScheduleMode};
use crate::env_id::{CommNature, EnvFlag, EnvId, Observability, TaskNature};
use crate::rewards::CORL2017;
use crate::world::{ActorType, DynamicsParams, Scenario};

/// Per-actor switches. Keys mirror the reference actor listing; keys this
/// simulator does not use are kept in `extra` and otherwise ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActorConfig {
    #[serde(rename = "type", skip_serializing_if = "Option::is_none")]
    pub actor_type: Option<ActorType>,
    pub enable_planner: bool,
    pub early_terminate_on_collision: bool,
    pub reward_function: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<String>,
    pub collision_sensor: String,
    pub lane_sensor: String,
    pub render: bool,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Default for ActorConfig {
    fn default() -> Self {
        Self {
            actor_type: None,
            enable_planner: true,
            early_terminate_on_collision: true,
            reward_function: CORL2017.into(),
            scenarios: None,
            collision_sensor: "on".into(),
            lane_sensor: "on".into(),
            render: false,
            extra: BTreeMap::new(),
        }
    }
}

impl ActorConfig {
    pub fn collision_sensor_on(&self) -> bool {
        self.collision_sensor == "on"
    }

    pub fn lane_sensor_on(&self) -> bool {
        self.lane_sensor == "on"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensingConfig {
    /// Direct sensing radius (m).
    pub radius: f64,
    /// Number of actor slots in the observation.
    pub slots: usize,
    /// Side length (cells) of the optional ego-centric occupancy grid.
    pub grid_cells: Option<usize>,
    /// Cell size (m) of the occupancy grid.
    pub grid_resolution: f64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self { radius: 40.0, slots: 8, grid_cells: None, grid_resolution: 2.0 }
    }
}

/// Stochastic impairments applied in adversarial environments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdversarialConfig {
    /// Probability that a message is dropped.
    pub p_drop: f64,
    /// Probability that a continuous observation entry is perturbed.
    pub p_noise: f64,
    /// Standard deviation of the additive noise.
    pub sigma: f64,
    /// Delivery delay (ticks) applied to every message.
    pub delay: u32,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        Self { p_drop: 0.2, p_noise: 0.1, sigma: 0.05, delay: 0 }
    }
}

impl AdversarialConfig {
    pub const NONE: AdversarialConfig = AdversarialConfig { p_drop: 0.0, p_noise: 0.0, sigma: 0.0, delay: 0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub actors: BTreeMap<String, ActorConfig>,
    pub observation: ObservationMode,
    pub comm: Option<CommConfig>,
    pub schedule: ScheduleMode,
    /// Ticks between decisions per agent under asynchronous scheduling.
    pub action_repeat: BTreeMap<String, u32>,
    pub adversarial: Option<AdversarialConfig>,
    pub sensing: SensingConfig,
    pub dynamics: DynamicsParams,
    /// Weight of the cooperative shaping term; 0 disables it.
    pub coop_weight: f64,
    /// Overrides the scenario's step limit.
    pub max_steps: Option<u32>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            actors: BTreeMap::new(),
            observation: ObservationMode::PO,
            comm: None,
            schedule: ScheduleMode::Synch,
            action_repeat: BTreeMap::new(),
            adversarial: None,
            sensing: SensingConfig::default(),
            dynamics: DynamicsParams::default(),
            coop_weight: 0.0,
            max_steps: None,
        }
    }
}

/// Cooperative shaping weight used when the task nature asks for it and the
/// configuration leaves it unset.
pub const DEFAULT_COOP_WEIGHT: f64 = 0.5;

impl EnvConfig {
    /// Parses a configuration, logging a warning for every ignored key.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: EnvConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.warn_unused();
        Ok(cfg)
    }

    pub fn warn_unused(&self) {
        for (name, actor) in &self.actors {
            for key in actor.extra.keys() {
                log::warn!("actor {name}: ignoring unsupported config key {key:?}");
            }
        }
    }

    pub fn actor(&self, name: &str) -> ActorConfig {
        self.actors.get(name).cloned().unwrap_or_default()
    }

    pub fn repeat_for(&self, name: &str) -> u32 {
        self.action_repeat.get(name).copied().unwrap_or(1).max(1)
    }

    /// Sets observability, communication, scheduling, perturbation and
    /// shaping from the taxonomy attributes of `id`.
    pub fn apply_env_id(&mut self, id: &EnvId) {
        self.observation = match id.observability {
            Observability::FO => ObservationMode::FO,
            Observability::PO => ObservationMode::PO,
        };
        self.comm = match id.comm_nature {
            CommNature::Comm => Some(self.comm.unwrap_or_default()),
            CommNature::Ncom => None,
        };
        self.schedule = if id.has_flag(EnvFlag::Async) { ScheduleMode::Async } else { ScheduleMode::Synch };
        if id.has_flag(EnvFlag::Async) && self.action_repeat.is_empty() {
            log::info!("asynchronous environment without action_repeat: every agent acts every tick");
        }
        self.adversarial = if id.has_flag(EnvFlag::Advrs) { Some(self.adversarial.unwrap_or_default()) } else { None };
        if id.task_nature == TaskNature::Coop && self.coop_weight == 0.0 {
            self.coop_weight = DEFAULT_COOP_WEIGHT;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSource {
    Driving(Scenario),
    GridIntersection(GridParams),
}

/// What a registry entry binds to an environment name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub source: EnvSource,
    #[serde(default)]
    pub config: EnvConfig,
}

impl EnvSpec {
    pub fn driving(scenario: Scenario) -> Self {
        Self { source: EnvSource::Driving(scenario), config: EnvConfig::default() }
    }

    pub fn grid(params: GridParams) -> Self {
        Self { source: EnvSource::GridIntersection(params), config: EnvConfig::default() }
    }
}
