//! Single-agent view of a one-actor environment.

use std::collections::BTreeMap;

use super::{AgentId, AgentInfo, EnvError, MultiAgentEnv, Observation};

/// Wraps an environment with exactly one agent behind a plain
/// `reset`/`step(action)` interface.
pub struct SingleAgentEnv {
    inner: Box<dyn MultiAgentEnv>,
    agent: AgentId,
}

/// One tick from the single agent's point of view.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: AgentInfo,
}

impl SingleAgentEnv {
    pub fn new(inner: Box<dyn MultiAgentEnv>) -> Result<Self, EnvError> {
        let ids = inner.agent_ids();
        if ids.len() != 1 {
            return Err(EnvError::BadSpec(format!("single-agent wrapper needs 1 agent, got {}", ids.len())));
        }
        Ok(Self { agent: ids[0].clone(), inner })
    }

    pub fn agent(&self) -> &AgentId {
        &self.agent
    }

    pub fn observation_dim(&self) -> usize {
        self.inner.observation_dim()
    }

    pub fn reset(&mut self, seed: u64) -> Result<Observation, EnvError> {
        let mut obs = self.inner.reset(seed)?;
        Ok(obs.remove(&self.agent).expect("agent observation"))
    }

    pub fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        let mut r = self.inner.step(&BTreeMap::from([(self.agent.clone(), action)]))?;
        Ok(Step {
            observation: r.observations.remove(&self.agent).expect("agent observation"),
            reward: r.rewards[&self.agent],
            done: r.dones[&self.agent],
            info: r.info.remove(&self.agent).unwrap_or_default(),
        })
    }
}
