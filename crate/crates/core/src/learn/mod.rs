//! Multi-agent learning: Q-learning with replay, best-response value
//! iteration, policy gradients, and a decoupled actor-learner runtime that
//! wires them to environments under four sharing architectures.

mod checkpoint;
mod game;
mod mlp;
mod policy;
mod q;
mod replay;
mod runtime;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pomg::EnvError;

pub use checkpoint::{config_hash, load_checkpoint, save_checkpoint, BrainLayout, CheckpointHeader, CHECKPOINT_FORMAT};
pub use game::{best_response_value_iteration, BestResponse, StochasticGame};
pub use mlp::Mlp;
pub use policy::{
    ac_update, discounted_returns, n_step_returns, pg_gradient, pg_surrogate, pg_update, AcParams, ActorCritic, Policy,
};
pub use q::{act_epsilon_greedy, argmax, q_loss, q_loss_gradient, q_update, td_target, Discretizer, QFunction, QModel};
pub use replay::{ParameterVector, ReplayBuffer, Transition};
pub use runtime::{
    evaluate, initial_snapshot, run_actor_learner, write_metrics, Brain, Budget, EpisodeRecord, EvalReport, Snapshot,
    TrainingReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty trajectory set")]
    EmptyTrajectory,
    #[error("value iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("bad learner config: {0}")]
    BadConfig(String),
    #[error("checkpoint does not match the environment: {0}")]
    ShapeMismatch(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

impl LearnError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::EmptyBatch => "EmptyBatch",
            Self::EmptyTrajectory => "EmptyTrajectory",
            Self::NoConvergence(_) => "NoConvergence",
            Self::BadConfig(_) => "BadConfig",
            Self::ShapeMismatch(_) => "ShapeMismatch",
            Self::BadCheckpoint(_) => "BadCheckpoint",
            Self::Env(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// One learner, one buffer and one parameter set per agent.
    IndependentDecentralized,
    /// One learner and one buffer for everyone, per-agent parameters, all
    /// trained on the team reward.
    Centralized,
    /// Per-agent parameters whose hidden layer is kept identical.
    SharedParameters,
    /// A single parameter set acting for every agent.
    SharedPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    QLearning,
    ActorCritic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Table over the environment's own discretization.
    Tabular,
    Mlp {
        hidden: usize,
    },
}

/// Linear decay from `start` to `end` over the first `fraction` of the budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub fraction: f64,
}

impl EpsilonSchedule {
    pub fn at(&self, progress: f64) -> f64 {
        if self.fraction <= 0.0 || progress >= self.fraction {
            return self.end;
        }
        let t = (progress / self.fraction).max(0.0);
        self.start + (self.end - self.start) * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub architecture: Architecture,
    pub model: ModelSpec,
    pub gamma: f64,
    /// Episode truncation in ticks, on top of the environment's own limit.
    pub horizon: Option<u32>,
    pub lr: f64,
    /// Critic step size (actor-critic only).
    pub critic_lr: f64,
    pub epsilon: EpsilonSchedule,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Transitions in a buffer before updates start.
    pub learning_starts: usize,
    pub target_sync: u64,
    /// Bootstrap horizon of the actor-critic targets.
    pub n_step: usize,
    pub entropy: f64,
    pub n_workers: usize,
    /// Environment ticks each worker runs per round.
    pub rollout_len: usize,
    /// Workers adopt the newest parameters every this many rounds.
    pub refresh_interval: u64,
    /// Run the workers on the calling thread instead of worker threads.
    pub inline: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::QLearning,
            architecture: Architecture::IndependentDecentralized,
            model: ModelSpec::Mlp { hidden: 64 },
            gamma: 0.99,
            horizon: None,
            lr: 6e-4,
            critic_lr: 6e-4,
            epsilon: EpsilonSchedule { start: 1.0, end: 0.05, fraction: 0.2 },
            batch_size: 32,
            replay_capacity: 50_000,
            learning_starts: 32,
            target_sync: 500,
            n_step: 5,
            entropy: 0.01,
            n_workers: 2,
            rollout_len: 50,
            refresh_interval: 1,
            inline: false,
        }
    }
}

impl LearnerConfig {
    /// Independent tabular Q-learning, tuned for the grid crossing.
    pub fn tabular_q() -> Self {
        Self {
            model: ModelSpec::Tabular,
            lr: 0.1,
            gamma: 0.95,
            batch_size: 8,
            replay_capacity: 20_000,
            learning_starts: 8,
            target_sync: 1,
            n_workers: 1,
            rollout_len: 30,
            ..Self::default()
        }
    }

    /// Shared-policy n-step actor-critic over feature vectors.
    pub fn shared_policy_ac() -> Self {
        Self {
            algorithm: Algorithm::ActorCritic,
            architecture: Architecture::SharedPolicy,
            model: ModelSpec::Mlp { hidden: 32 },
            lr: 5e-3,
            critic_lr: 1e-2,
            gamma: 0.99,
            n_step: 5,
            entropy: 0.01,
            n_workers: 2,
            rollout_len: 25,
            ..Self::default()
        }
    }

    /// Actor-critic with one centralized learner over per-agent policies.
    pub fn central_ac() -> Self {
        Self { architecture: Architecture::Centralized, ..Self::shared_policy_ac() }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: String| Err(LearnError::BadConfig(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if self.lr <= 0.0 || self.critic_lr <= 0.0 || !self.lr.is_finite() {
            return bad("learning rates must be positive".into());
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.n_workers == 0 || self.rollout_len == 0 {
            return bad("batch_size, replay_capacity, n_workers and rollout_len must be positive".into());
        }
        let e = &self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) || e.end > e.start {
            return bad("epsilon must decay within [0, 1]".into());
        }
        if self.algorithm == Algorithm::ActorCritic && self.model == ModelSpec::Tabular {
            return bad("actor-critic needs an MLP model".into());
        }
        if self.architecture == Architecture::SharedParameters && self.model == ModelSpec::Tabular {
            return bad("a shared parameter block needs an MLP model".into());
        }
        if self.refresh_interval == 0 {
            return bad("refresh_interval must be at least 1".into());
        }
        Ok(())
    }
}

/// Who learns what from whom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerTopology {
    pub architecture: Architecture,
    pub n_agents: usize,
    /// Parameter set used by each agent.
    pub param_of_agent: Vec<usize>,
    pub n_param_sets: usize,
    /// Learner (and replay buffer) fed by each agent.
    pub learner_of_agent: Vec<usize>,
    pub n_learners: usize,
    /// Hidden layers are synchronized across parameter sets after updates.
    pub shared_block: bool,
    /// Agents are trained on the sum of all agents' rewards.
    pub team_reward: bool,
}

pub fn configure_architecture(config: &LearnerConfig, n_agents: usize) -> Result<LearnerTopology, LearnError> {
    if n_agents == 0 {
        return Err(LearnError::BadConfig("at least one agent is required".into()));
    }
    config.validate()?;
    let each: Vec<usize> = (0..n_agents).collect();
    let one = vec![0; n_agents];
    let (param_of_agent, n_param_sets, learner_of_agent, n_learners) = match config.architecture {
        Architecture::IndependentDecentralized | Architecture::SharedParameters => {
            (each.clone(), n_agents, each, n_agents)
        }
        Architecture::Centralized => (each, n_agents, one, 1),
        Architecture::SharedPolicy => (one.clone(), 1, one, 1),
    };
    Ok(LearnerTopology {
        architecture: config.architecture,
        n_agents,
        param_of_agent,
        n_param_sets,
        learner_of_agent,
        n_learners,
        shared_block: config.architecture == Architecture::SharedParameters,
        team_reward: config.architecture == Architecture::Centralized,
    })
}
