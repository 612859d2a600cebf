//! Checkpoint files: one JSON header line, then every parameter as a
//! little-endian f64.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mlp::Mlp;
use super::policy::{ActorCritic, Policy};
use super::q::{QFunction, QModel};
use super::replay::ParameterVector;
use super::runtime::{Brain, Snapshot};
use super::{LearnError, LearnerConfig};
use crate::pomg::AgentId;

pub const CHECKPOINT_FORMAT: &str = "cadsim-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BrainLayout {
    /// θ followed by θ⁻.
    Q { model: QModel, n_actions: usize, sync_interval: u64, version: u64 },
    /// Policy parameters followed by critic parameters.
    Ac { policy: Mlp, critic: Mlp, policy_version: u64, critic_version: u64 },
}

impl BrainLayout {
    fn len(&self) -> usize {
        match self {
            BrainLayout::Q { model, n_actions, .. } => 2 * q_len(model, *n_actions),
            BrainLayout::Ac { policy, critic, .. } => policy.num_params() + critic.num_params(),
        }
    }
}

fn q_len(model: &QModel, n_actions: usize) -> usize {
    match model {
        QModel::Tabular(d) => d.num_states() * n_actions,
        QModel::Mlp(net) => net.num_params(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub env: String,
    pub config_hash: String,
    pub version: u64,
    pub agents: Vec<AgentId>,
    pub param_of_agent: Vec<usize>,
    pub brains: Vec<BrainLayout>,
    pub payload_len: usize,
}

/// Hex SHA-256 of the environment label and the learner config.
pub fn config_hash(env: &str, config: &LearnerConfig) -> String {
    let json = serde_json::to_string(&(env, config)).expect("config serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_checkpoint(path: &Path, params: &Snapshot, env: &str, config_hash: &str) -> std::io::Result<()> {
    let mut payload: Vec<f64> = Vec::new();
    let brains = params
        .brains
        .iter()
        .map(|b| match b {
            Brain::Q(q) => {
                payload.extend(&q.theta.values);
                if q.sync_interval == 1 {
                    payload.extend(&q.theta.values);
                } else {
                    payload.extend(&q.target);
                }
                BrainLayout::Q {
                    model: q.model.clone(),
                    n_actions: q.n_actions,
                    sync_interval: q.sync_interval,
                    version: q.theta.version,
                }
            }
            Brain::Ac(ac) => {
                payload.extend(&ac.policy.theta.values);
                payload.extend(&ac.critic_theta.values);
                BrainLayout::Ac {
                    policy: ac.policy.net,
                    critic: ac.critic,
                    policy_version: ac.policy.theta.version,
                    critic_version: ac.critic_theta.version,
                }
            }
        })
        .collect();
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.to_string(),
        env: env.to_string(),
        config_hash: config_hash.to_string(),
        version: params.version,
        agents: params.agents.clone(),
        param_of_agent: params.param_of_agent.clone(),
        brains,
        payload_len: payload.len(),
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut f, &header)?;
    f.write_all(b"\n")?;
    for x in payload {
        f.write_all(&x.to_le_bytes())?;
    }
    f.flush()
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, Snapshot), LearnError> {
    let bad = |m: String| LearnError::BadCheckpoint(m);
    let file = std::fs::File::open(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let mut r = BufReader::new(file);
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| bad(e.to_string()))?;
    let header: CheckpointHeader = serde_json::from_str(line.trim_end()).map_err(|e| bad(e.to_string()))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(bad(format!("unknown format {:?}", header.format)));
    }
    let expected: usize = header.brains.iter().map(BrainLayout::len).sum();
    if expected != header.payload_len {
        return Err(bad(format!("header promises {} values, layout needs {expected}", header.payload_len)));
    }
    if header.param_of_agent.len() != header.agents.len()
        || header.param_of_agent.iter().any(|&p| p >= header.brains.len())
    {
        return Err(bad("agent to parameter map is inconsistent".into()));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| bad(e.to_string()))?;
    if bytes.len() != expected * 8 {
        return Err(bad(format!("payload has {} bytes, expected {}", bytes.len(), expected * 8)));
    }
    let values: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let mut at = 0;
    let mut take = |n: usize| {
        let s = values[at..at + n].to_vec();
        at += n;
        s
    };
    let brains = header
        .brains
        .iter()
        .map(|layout| match layout {
            BrainLayout::Q { model, n_actions, sync_interval, version } => {
                let n = q_len(model, *n_actions);
                let theta = take(n);
                let target = take(n);
                Brain::Q(QFunction {
                    model: model.clone(),
                    n_actions: *n_actions,
                    theta: ParameterVector { values: theta, version: *version },
                    target,
                    sync_interval: *sync_interval,
                })
            }
            BrainLayout::Ac { policy, critic, policy_version, critic_version } => {
                let p = take(policy.num_params());
                let c = take(critic.num_params());
                Brain::Ac(ActorCritic {
                    policy: Policy { net: *policy, theta: ParameterVector { values: p, version: *policy_version } },
                    critic: *critic,
                    critic_theta: ParameterVector { values: c, version: *critic_version },
                })
            }
        })
        .collect();
    let snapshot = Snapshot {
        version: header.version,
        agents: header.agents.clone(),
        param_of_agent: header.param_of_agent.clone(),
        brains,
    };
    Ok((header, snapshot))
}
