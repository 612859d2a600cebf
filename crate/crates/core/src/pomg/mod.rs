//! Multi-agent environment interface: joint reset and step over a partially
//! observable Markov game.
//!
//! Each tick every agent submits a discrete action, the world advances one
//! step, and every agent receives its own observation, reward and done flag.
//! With a single agent the interface degenerates to an ordinary POMDP.

mod config;
mod driving;
mod grid;
mod observe;
mod registry;
mod single;

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env_id::EnvIdError;
use crate::rewards::RewardSignals;
use crate::world::{ActorState, MapModel, Route, Vec2, WorldError};

pub use config::{ActorConfig, AdversarialConfig, EnvConfig, EnvSource, EnvSpec, SensingConfig};
pub use driving::DrivingEnv;
pub use grid::{GridIntersectionEnv, GridParams};
pub use observe::{
    encode_observation, exchange_messages, perturb, perturb_messages, perturb_observations, schedule, visible_actors,
    CommConfig, ObservationLayout, ObservationMode, ScheduleMode,
};
pub use registry::{default_registry, make_env, make_env_from_spec};
pub use single::SingleAgentEnv;

/// Name of an agent (and of the actor it controls).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_string())
    }
}

impl From<String> for AgentId {
    fn from(s: String) -> Self {
        AgentId(s)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AgentId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Environment state outside the actors: weather, clock and the random stream
/// used for every stochastic draw after reset.
#[derive(Debug, Clone)]
pub struct EnvState {
    pub weather: u32,
    pub tick: u64,
    pub rng: ChaCha8Rng,
}

impl EnvState {
    pub fn new(weather: u32, tick: u64) -> Self {
        Self { weather, tick, rng: ChaCha8Rng::seed_from_u64(0) }
    }

    pub fn seeded(seed: u64) -> Self {
        Self { weather: 0, tick: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

/// The joint state of all actors plus the environment state.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub actors: BTreeMap<AgentId, ActorState>,
    pub env: EnvState,
    /// Planned routes; absent when the planner is disabled.
    pub routes: BTreeMap<AgentId, Route>,
    pub goals: BTreeMap<AgentId, Vec2>,
    /// Per-agent lane sensor switch; missing entries count as on.
    pub lane_sensor: BTreeMap<AgentId, bool>,
}

impl WorldState {
    pub fn new(env: EnvState) -> Self {
        Self {
            actors: BTreeMap::new(),
            env,
            routes: BTreeMap::new(),
            goals: BTreeMap::new(),
            lane_sensor: BTreeMap::new(),
        }
    }

    /// Agent ids in slot order.
    pub fn agent_ids(&self) -> Vec<AgentId> {
        self.actors.keys().cloned().collect()
    }

    pub fn index_of(&self, agent: &AgentId) -> Option<usize> {
        self.actors.keys().position(|k| k == agent)
    }
}

/// A fixed-length feature vector.
pub type Observation = Vec<f64>;

/// A state report broadcast by one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub sender: AgentId,
    pub state: ActorState,
    /// Actors the sender could see directly when it sent the message.
    pub visible: Vec<(AgentId, ActorState)>,
    /// Ticks between sending and delivery.
    pub staleness: u32,
}

/// Per-agent diagnostics of one tick.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub signals: RewardSignals,
    /// Collision events involving the agent this tick.
    pub collisions: u32,
    pub reached_goal: bool,
    /// Whether the agent's submitted action took effect this tick.
    pub acted: bool,
}

/// Everything the environment emits for one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStepResult {
    pub observations: BTreeMap<AgentId, Observation>,
    pub rewards: BTreeMap<AgentId, f64>,
    pub dones: BTreeMap<AgentId, bool>,
    pub all_done: bool,
    pub info: BTreeMap<AgentId, AgentInfo>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("unknown agent id {0:?}")]
    UnknownAgentId(String),
    #[error("action {action} for agent {agent:?} is outside 0..{limit}")]
    ActionOutOfRange { agent: String, action: usize, limit: usize },
    #[error("no action submitted for active agent {0:?}")]
    MissingAction(String),
    #[error("episode is over; call reset")]
    EpisodeOver,
    #[error("step called before reset")]
    NotReset,
    #[error("scenario has no route for agent {0:?}")]
    NoPath(String),
    #[error("bad environment spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    EnvId(#[from] EnvIdError),
}

impl EnvError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::UnknownAgentId(_) => "UnknownAgentId",
            Self::ActionOutOfRange { .. } => "ActionOutOfRange",
            Self::MissingAction(_) => "MissingAction",
            Self::EpisodeOver => "EpisodeOver",
            Self::NotReset => "NotReset",
            Self::NoPath(_) => "NoPath",
            Self::BadSpec(_) => "BadSpec",
            Self::World(_) => "WorldError",
            Self::EnvId(e) => e.kind(),
        }
    }
}

/// The joint reset/step contract shared by every environment.
pub trait MultiAgentEnv: Send {
    /// Agent ids in slot order; fixed for the lifetime of the instance.
    fn agent_ids(&self) -> Vec<AgentId>;
    fn observation_dim(&self) -> usize;
    fn num_actions(&self) -> usize {
        crate::world::NUM_ACTIONS
    }
    fn max_steps(&self) -> u32;
    fn reset(&mut self, seed: u64) -> Result<BTreeMap<AgentId, Observation>, EnvError>;
    fn step(&mut self, actions: &BTreeMap<AgentId, usize>) -> Result<JointStepResult, EnvError>;
    /// Current world, for rendering and diagnostics.
    fn world(&self) -> Option<&WorldState>;
    /// Lane map, for environments that have one.
    fn map(&self) -> Option<&MapModel> {
        None
    }
    /// Per-dimension (low, high, bins) for tabular learners, when the
    /// environment has a natural discretization.
    fn tabular_grid(&self) -> Option<Vec<(f64, f64, usize)>> {
        None
    }
}

/// Checks an action map against the active agent set.
pub(crate) fn validate_actions(
    agents: &[AgentId],
    active: &BTreeMap<AgentId, bool>,
    actions: &BTreeMap<AgentId, usize>,
    limit: usize,
) -> Result<(), EnvError> {
    for (id, &a) in actions {
        if !agents.contains(id) {
            return Err(EnvError::UnknownAgentId(id.0.clone()));
        }
        if a >= limit {
            return Err(EnvError::ActionOutOfRange { agent: id.0.clone(), action: a, limit });
        }
    }
    for id in agents {
        if active.get(id).copied().unwrap_or(false) && !actions.contains_key(id) {
            return Err(EnvError::MissingAction(id.0.clone()));
        }
    }
    Ok(())
}
