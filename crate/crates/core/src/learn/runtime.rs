//! Decoupled actor-learner training.
//!
//! Rollout workers own their environments and act with an immutable,
//! versioned snapshot of the parameters. The learner consumes their
//! experience in rounds: every worker runs `rollout_len` ticks, the outputs
//! are merged in worker-id order, the learner updates, and a new snapshot is
//! published. Workers pick up the newest snapshot every `refresh_interval`
//! rounds. Because each worker has its own RNG stream and the merge order is
//! fixed, a run is a pure function of its seed whether the workers run on
//! threads or inline.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use crossbeam_channel::{bounded, unbounded, Receiver, Sender};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{ac_update, AcParams, ActorCritic};
use super::q::{act_epsilon_greedy, argmax, q_update, Discretizer, QFunction};
use super::replay::{ReplayBuffer, Transition};
use super::{configure_architecture, Algorithm, LearnError, LearnerConfig, LearnerTopology, ModelSpec};
use crate::pomg::{AgentId, EnvError, MultiAgentEnv, Observation};

/// Parameters of one agent's (or one shared) decision maker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Brain {
    Q(QFunction),
    Ac(ActorCritic),
}

impl Brain {
    fn act(&self, obs: &[f64], epsilon: f64, rng: &mut impl Rng) -> usize {
        match self {
            Brain::Q(q) => act_epsilon_greedy(q, obs, epsilon, rng),
            Brain::Ac(ac) => ac.policy.sample(obs, rng),
        }
    }

    pub fn greedy(&self, obs: &[f64]) -> usize {
        match self {
            Brain::Q(q) => argmax(&q.values(obs)),
            Brain::Ac(ac) => ac.policy.greedy(obs),
        }
    }

    /// The distribution the brain samples actions from while training.
    pub fn action_probs(&self, obs: &[f64], epsilon: f64) -> Vec<f64> {
        match self {
            Brain::Q(q) => {
                let n = q.n_actions;
                let mut p = vec![epsilon / n as f64; n];
                p[argmax(&q.values(obs))] += 1.0 - epsilon;
                p
            }
            Brain::Ac(ac) => ac.policy.probs(obs),
        }
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Brain::Q(q) => {
                let n = match &q.model {
                    super::QModel::Mlp(net) => net.hidden_block_len(),
                    super::QModel::Tabular(_) => 0,
                };
                vec![&mut q.theta.values[..n]]
            }
            Brain::Ac(ac) => {
                let np = ac.policy.net.hidden_block_len();
                let nc = ac.critic.hidden_block_len();
                vec![&mut ac.policy.theta.values[..np], &mut ac.critic_theta.values[..nc]]
            }
        }
    }

    /// `(observation size, action count)` the brain was built for.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Brain::Q(q) => match &q.model {
                super::QModel::Tabular(d) => (d.dims.len(), q.n_actions),
                super::QModel::Mlp(net) => (net.input, q.n_actions),
            },
            Brain::Ac(ac) => (ac.policy.net.input, ac.policy.n_actions()),
        }
    }

    /// Number of updates applied so far.
    pub fn updates(&self) -> u64 {
        match self {
            Brain::Q(q) => q.theta.version,
            Brain::Ac(ac) => ac.policy.theta.version,
        }
    }
}

/// Immutable parameters published by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub version: u64,
    pub agents: Vec<AgentId>,
    /// Brain index per agent.
    pub param_of_agent: Vec<usize>,
    pub brains: Vec<Brain>,
}

impl Snapshot {
    pub fn brain_for(&self, agent: usize) -> &Brain {
        &self.brains[self.param_of_agent[agent]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Episodes(usize),
    Steps(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub worker: usize,
    pub length: u32,
    pub rewards: BTreeMap<AgentId, f64>,
    pub collisions: BTreeMap<AgentId, u32>,
    /// Every agent reached its goal and nobody collided.
    pub success: bool,
}

impl EpisodeRecord {
    pub fn total_reward(&self) -> f64 {
        self.rewards.values().sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingReport {
    pub config: LearnerConfig,
    pub seed: u64,
    pub budget: Budget,
    pub agents: Vec<AgentId>,
    pub topology: LearnerTopology,
    pub episodes: Vec<EpisodeRecord>,
    /// Episode reward series per agent.
    pub agent_rewards: BTreeMap<AgentId, Vec<f64>>,
    /// Running mean and max of the per-episode sum of agent rewards.
    pub cumulative_mean: Vec<f64>,
    pub cumulative_max: Vec<f64>,
    pub total_steps: u64,
    pub updates: u64,
    pub rounds: u64,
    /// Snapshot version each worker acted with, per round.
    pub worker_versions: Vec<Vec<u64>>,
    pub wall_clock_s: f64,
    #[serde(skip)]
    pub final_params: Option<Snapshot>,
}

impl TrainingReport {
    /// Success rate over the last `window` episodes.
    pub fn final_success_rate(&self, window: usize) -> f64 {
        let n = self.episodes.len().min(window);
        if n == 0 {
            return 0.0;
        }
        let tail = &self.episodes[self.episodes.len() - n..];
        tail.iter().filter(|e| e.success).count() as f64 / n as f64
    }
}

struct Job {
    snapshot: Option<Arc<Snapshot>>,
    epsilon: f64,
    ticks: usize,
}

struct RoundOutput {
    worker: usize,
    version: u64,
    /// `(agent index, transition)` in tick order.
    transitions: Vec<(usize, Transition)>,
    episodes: Vec<EpisodeRecord>,
    steps: u64,
}

struct Worker {
    id: usize,
    env: Box<dyn MultiAgentEnv>,
    agents: Vec<AgentId>,
    rng: ChaCha8Rng,
    snapshot: Arc<Snapshot>,
    team_reward: bool,
    horizon: Option<u32>,
    obs: Option<BTreeMap<AgentId, Observation>>,
    done: Vec<bool>,
    ep_len: u32,
    ep_rewards: Vec<f64>,
    ep_collisions: Vec<u32>,
    ep_reached: Vec<bool>,
}

impl Worker {
    fn run(&mut self, job: Job) -> Result<RoundOutput, EnvError> {
        if let Some(s) = job.snapshot {
            self.snapshot = s;
        }
        let mut out = RoundOutput {
            worker: self.id,
            version: self.snapshot.version,
            transitions: Vec::new(),
            episodes: Vec::new(),
            steps: 0,
        };
        for _ in 0..job.ticks {
            let obs = match self.obs.take() {
                Some(o) => o,
                None => {
                    let o = self.env.reset(self.rng.random())?;
                    let n = self.agents.len();
                    self.done = vec![false; n];
                    self.ep_len = 0;
                    self.ep_rewards = vec![0.0; n];
                    self.ep_collisions = vec![0; n];
                    self.ep_reached = vec![false; n];
                    o
                }
            };
            let mut actions = BTreeMap::new();
            for (i, id) in self.agents.iter().enumerate() {
                if !self.done[i] {
                    let a = self.snapshot.brain_for(i).act(&obs[id], job.epsilon, &mut self.rng);
                    actions.insert(id.clone(), a);
                }
            }
            let res = self.env.step(&actions)?;
            out.steps += 1;
            self.ep_len += 1;
            let truncated = self.horizon.is_some_and(|h| self.ep_len >= h);
            let team: f64 = res.rewards.values().sum();
            for (i, id) in self.agents.iter().enumerate() {
                let Some(&action) = actions.get(id) else { continue };
                let reward = res.rewards.get(id).copied().unwrap_or(0.0);
                let done = res.dones.get(id).copied().unwrap_or(false);
                out.transitions.push((
                    i,
                    Transition {
                        agent: id.clone(),
                        obs: obs[id].clone(),
                        action,
                        reward: if self.team_reward { team } else { reward },
                        next_obs: res.observations.get(id).cloned().unwrap_or_else(|| obs[id].clone()),
                        done: done || truncated,
                    },
                ));
                self.ep_rewards[i] += reward;
                if let Some(info) = res.info.get(id) {
                    self.ep_collisions[i] += info.collisions;
                    self.ep_reached[i] |= info.reached_goal;
                }
                self.done[i] = done;
            }
            if res.all_done || truncated {
                let collided = self.ep_collisions.iter().any(|&c| c > 0);
                out.episodes.push(EpisodeRecord {
                    episode: 0,
                    worker: self.id,
                    length: self.ep_len,
                    rewards: self.agents.iter().cloned().zip(self.ep_rewards.iter().copied()).collect(),
                    collisions: self.agents.iter().cloned().zip(self.ep_collisions.iter().copied()).collect(),
                    success: !collided && self.ep_reached.iter().all(|&r| r),
                });
                self.obs = None;
            } else {
                self.obs = Some(res.observations);
            }
        }
        Ok(out)
    }
}

enum Pool {
    Inline(Vec<Worker>),
    Threads { jobs: Vec<Sender<Job>>, results: Receiver<(usize, Result<RoundOutput, EnvError>)> },
}

impl Pool {
    fn round(&mut self, jobs: Vec<Job>) -> Result<Vec<RoundOutput>, LearnError> {
        let mut outs = match self {
            Pool::Inline(workers) => {
                workers.iter_mut().zip(jobs).map(|(w, j)| w.run(j)).collect::<Result<Vec<_>, _>>()?
            }
            Pool::Threads { jobs: txs, results } => {
                for (tx, j) in txs.iter().zip(jobs) {
                    tx.send(j).map_err(|_| LearnError::BadConfig("rollout worker exited".into()))?;
                }
                let mut outs = Vec::with_capacity(txs.len());
                for _ in 0..txs.len() {
                    let (_, r) = results.recv().map_err(|_| LearnError::BadConfig("rollout worker exited".into()))?;
                    outs.push(r?);
                }
                outs
            }
        };
        outs.sort_by_key(|o| o.worker);
        Ok(outs)
    }
}

fn init_brains(
    config: &LearnerConfig,
    topo: &LearnerTopology,
    probe: &dyn MultiAgentEnv,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Brain>, LearnError> {
    let obs_dim = probe.observation_dim();
    let n_actions = probe.num_actions();
    let mut brains = Vec::with_capacity(topo.n_param_sets);
    for _ in 0..topo.n_param_sets {
        let brain = match (config.algorithm, config.model) {
            (Algorithm::QLearning, ModelSpec::Tabular) => {
                let grid = probe
                    .tabular_grid()
                    .ok_or_else(|| LearnError::BadConfig("environment has no tabular discretization".into()))?;
                Brain::Q(QFunction::tabular(Discretizer::new(grid), n_actions, config.target_sync))
            }
            (Algorithm::QLearning, ModelSpec::Mlp { hidden }) => {
                Brain::Q(QFunction::mlp(obs_dim, hidden, n_actions, config.target_sync, rng))
            }
            (Algorithm::ActorCritic, ModelSpec::Mlp { hidden }) => {
                Brain::Ac(ActorCritic::new(obs_dim, hidden, n_actions, rng))
            }
            (Algorithm::ActorCritic, ModelSpec::Tabular) => {
                return Err(LearnError::BadConfig("actor-critic needs an MLP model".into()))
            }
        };
        brains.push(brain);
    }
    if topo.shared_block {
        average_hidden_blocks(&mut brains);
    }
    Ok(brains)
}

/// Freshly initialized parameters for `env`, as the learner would start them.
pub fn initial_snapshot(env: &dyn MultiAgentEnv, config: &LearnerConfig, seed: u64) -> Result<Snapshot, LearnError> {
    let agents = env.agent_ids();
    let topo = configure_architecture(config, agents.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let brains = init_brains(config, &topo, env, &mut rng)?;
    Ok(Snapshot { version: 0, agents, param_of_agent: topo.param_of_agent, brains })
}

/// Replaces every hidden block by the element-wise mean across brains.
fn average_hidden_blocks(brains: &mut [Brain]) {
    let n = brains.len();
    if n < 2 {
        return;
    }
    let mut sums: Vec<Vec<f64>> = brains[0].blocks_mut().iter().map(|b| vec![0.0; b.len()]).collect();
    for brain in brains.iter_mut() {
        for (s, b) in sums.iter_mut().zip(brain.blocks_mut()) {
            s.iter_mut().zip(b.iter()).for_each(|(s, x)| *s += x);
        }
    }
    for s in &mut sums {
        s.iter_mut().for_each(|x| *x /= n as f64);
    }
    for brain in brains.iter_mut() {
        for (s, b) in sums.iter().zip(brain.blocks_mut()) {
            b.copy_from_slice(s);
        }
    }
}

/// Trains on environments built by `make_env` until `budget` is spent.
pub fn run_actor_learner<F>(
    make_env: F,
    config: &LearnerConfig,
    seed: u64,
    budget: Budget,
) -> Result<TrainingReport, LearnError>
where
    F: Fn() -> Result<Box<dyn MultiAgentEnv>, EnvError>,
{
    let started = Instant::now();
    let probe = make_env()?;
    let agents = probe.agent_ids();
    let topo = configure_architecture(config, agents.len())?;
    let index: BTreeMap<AgentId, usize> = agents.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();

    let mut learner_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut brains = init_brains(config, &topo, probe.as_ref(), &mut learner_rng)?;
    let mut buffers: Vec<ReplayBuffer> =
        (0..topo.n_learners).map(|_| ReplayBuffer::new(config.replay_capacity, topo.n_learners == 1)).collect();
    let ac = AcParams {
        gamma: config.gamma,
        lr: config.lr,
        critic_lr: config.critic_lr,
        n_step: config.n_step,
        entropy: config.entropy,
    };

    let mut snapshot = Arc::new(Snapshot {
        version: 0,
        agents: agents.clone(),
        param_of_agent: topo.param_of_agent.clone(),
        brains: brains.clone(),
    });

    let mut workers = Vec::with_capacity(config.n_workers);
    let mut envs = vec![probe];
    while envs.len() < config.n_workers {
        envs.push(make_env()?);
    }
    for (id, env) in envs.into_iter().enumerate() {
        workers.push(Worker {
            id,
            env,
            agents: agents.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            snapshot: snapshot.clone(),
            team_reward: topo.team_reward,
            horizon: config.horizon,
            obs: None,
            done: Vec::new(),
            ep_len: 0,
            ep_rewards: Vec::new(),
            ep_collisions: Vec::new(),
            ep_reached: Vec::new(),
        });
        // independent streams per worker
        workers[id].rng.set_stream(1 + id as u64);
    }

    let mut handles = Vec::new();
    let mut pool = if config.inline {
        Pool::Inline(workers)
    } else {
        let (res_tx, res_rx) = unbounded();
        let mut txs = Vec::new();
        for mut w in workers {
            let (tx, rx) = bounded::<Job>(1);
            let res_tx = res_tx.clone();
            txs.push(tx);
            handles.push(std::thread::spawn(move || {
                for job in rx {
                    let r = w.run(job);
                    if res_tx.send((w.id, r)).is_err() {
                        break;
                    }
                }
            }));
        }
        Pool::Threads { jobs: txs, results: res_rx }
    };

    let mut episodes: Vec<EpisodeRecord> = Vec::new();
    let mut total_steps = 0u64;
    let mut updates = 0u64;
    let mut round = 0u64;
    let mut worker_versions = Vec::new();
    let n_workers = config.n_workers;

    loop {
        let (progress, remaining_steps) = match budget {
            Budget::Episodes(n) => {
                if episodes.len() >= n {
                    break;
                }
                (episodes.len() as f64 / n.max(1) as f64, u64::MAX)
            }
            Budget::Steps(n) => {
                if total_steps >= n {
                    break;
                }
                (total_steps as f64 / n.max(1) as f64, n - total_steps)
            }
        };
        let epsilon = config.epsilon.at(progress);
        let refresh = round > 0 && round.is_multiple_of(config.refresh_interval);
        let jobs = (0..n_workers)
            .map(|w| {
                let share =
                    remaining_steps / n_workers as u64 + u64::from((w as u64) < remaining_steps % n_workers as u64);
                Job {
                    snapshot: refresh.then(|| snapshot.clone()),
                    epsilon,
                    ticks: (config.rollout_len as u64).min(share) as usize,
                }
            })
            .collect();
        let outs = pool.round(jobs)?;
        round += 1;
        worker_versions.push(outs.iter().map(|o| o.version).collect());

        for o in &outs {
            total_steps += o.steps;
            for e in &o.episodes {
                let mut e = e.clone();
                e.episode = episodes.len();
                episodes.push(e);
            }
        }

        match config.algorithm {
            Algorithm::QLearning => {
                let mut fresh = vec![0usize; topo.n_learners];
                for o in &outs {
                    for (i, t) in &o.transitions {
                        let l = topo.learner_of_agent[*i];
                        buffers[l].push(t.clone());
                        fresh[l] += 1;
                    }
                }
                for (l, &count) in fresh.iter().enumerate() {
                    for _ in 0..count {
                        if buffers[l].len() < config.learning_starts.max(1) {
                            continue;
                        }
                        let batch = buffers[l].sample(config.batch_size, &mut learner_rng);
                        let mut groups: BTreeMap<usize, Vec<&Transition>> = BTreeMap::new();
                        for t in batch {
                            groups.entry(topo.param_of_agent[index[&t.agent]]).or_default().push(t);
                        }
                        for (p, group) in groups {
                            if let Brain::Q(q) = &mut brains[p] {
                                q_update(q, &group, config.gamma, config.lr)?;
                                updates += 1;
                            }
                        }
                    }
                }
            }
            Algorithm::ActorCritic => {
                let mut segments: BTreeMap<usize, Vec<Vec<Transition>>> = BTreeMap::new();
                for o in &outs {
                    let mut per_agent: BTreeMap<usize, Vec<Transition>> = BTreeMap::new();
                    for (i, t) in &o.transitions {
                        per_agent.entry(*i).or_default().push(t.clone());
                    }
                    for (i, seg) in per_agent {
                        segments.entry(topo.param_of_agent[i]).or_default().push(seg);
                    }
                }
                for (p, segs) in segments {
                    if let Brain::Ac(a) = &mut brains[p] {
                        ac_update(a, &segs, &ac)?;
                        updates += 1;
                    }
                }
            }
        }
        if topo.shared_block {
            average_hidden_blocks(&mut brains);
        }
        if round.is_multiple_of(config.refresh_interval) {
            snapshot = Arc::new(Snapshot {
                version: round,
                agents: agents.clone(),
                param_of_agent: topo.param_of_agent.clone(),
                brains: brains.clone(),
            });
        }
    }

    drop(pool);
    for h in handles {
        let _ = h.join();
    }

    if let Budget::Episodes(n) = budget {
        episodes.truncate(n);
    }
    let mut agent_rewards: BTreeMap<AgentId, Vec<f64>> = agents.iter().map(|a| (a.clone(), Vec::new())).collect();
    let mut cumulative_mean = Vec::with_capacity(episodes.len());
    let mut cumulative_max = Vec::with_capacity(episodes.len());
    let (mut sum, mut max) = (0.0, f64::NEG_INFINITY);
    for (k, e) in episodes.iter().enumerate() {
        for (a, r) in &e.rewards {
            agent_rewards.get_mut(a).expect("known agent").push(*r);
        }
        let total = e.total_reward();
        sum += total;
        max = max.max(total);
        cumulative_mean.push(sum / (k + 1) as f64);
        cumulative_max.push(max);
    }
    log::info!("trained {} episodes, {} steps, {} updates in {} rounds", episodes.len(), total_steps, updates, round);
    Ok(TrainingReport {
        config: config.clone(),
        seed,
        budget,
        agents: agents.clone(),
        topology: topo.clone(),
        episodes,
        agent_rewards,
        cumulative_mean,
        cumulative_max,
        total_steps,
        updates,
        rounds: round,
        worker_versions,
        wall_clock_s: started.elapsed().as_secs_f64(),
        final_params: Some(Snapshot { version: round, agents, param_of_agent: topo.param_of_agent, brains }),
    })
}

/// Writes one JSON line per episode and agent.
pub fn write_metrics(report: &TrainingReport, path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in &report.episodes {
        for (agent, reward) in &e.rewards {
            let line = serde_json::json!({
                "episode": e.episode,
                "agent": agent,
                "reward": reward,
                "length": e.length,
                "collisions": e.collisions.get(agent).copied().unwrap_or(0),
            });
            writeln!(f, "{line}")?;
        }
    }
    f.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_reward: f64,
    pub mean_length: f64,
    pub collisions: u32,
    pub records: Vec<EpisodeRecord>,
}

/// Runs greedy episodes with `params`.
pub fn evaluate(
    params: &Snapshot,
    env: &mut dyn MultiAgentEnv,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, LearnError> {
    let agents = env.agent_ids();
    if agents != params.agents {
        return Err(LearnError::ShapeMismatch(format!(
            "parameters are for agents {:?}, environment has {:?}",
            params.agents, agents
        )));
    }
    let want = (env.observation_dim(), env.num_actions());
    if let Some(b) = params.brains.iter().find(|b| b.shape() != want) {
        return Err(LearnError::ShapeMismatch(format!(
            "parameters expect (observation, actions) = {:?}, environment has {want:?}",
            b.shape()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(episodes);
    for k in 0..episodes {
        let mut obs = env.reset(rng.random())?;
        let n = agents.len();
        let (mut done, mut rewards, mut coll, mut reached) =
            (vec![false; n], vec![0.0; n], vec![0u32; n], vec![false; n]);
        let mut length = 0;
        loop {
            let actions: BTreeMap<AgentId, usize> = agents
                .iter()
                .enumerate()
                .filter(|(i, _)| !done[*i])
                .map(|(i, id)| (id.clone(), params.brain_for(i).greedy(&obs[id])))
                .collect();
            let res = env.step(&actions)?;
            length += 1;
            for (i, id) in agents.iter().enumerate() {
                rewards[i] += res.rewards.get(id).copied().unwrap_or(0.0);
                if let Some(info) = res.info.get(id) {
                    coll[i] += info.collisions;
                    reached[i] |= info.reached_goal;
                }
                done[i] = res.dones.get(id).copied().unwrap_or(done[i]);
            }
            if res.all_done {
                break;
            }
            obs = res.observations;
        }
        records.push(EpisodeRecord {
            episode: k,
            worker: 0,
            length,
            rewards: agents.iter().cloned().zip(rewards).collect(),
            collisions: agents.iter().cloned().zip(coll.iter().copied()).collect(),
            success: coll.iter().all(|&c| c == 0) && reached.iter().all(|&r| r),
        });
    }
    let n = records.len().max(1) as f64;
    Ok(EvalReport {
        episodes,
        success_rate: records.iter().filter(|r| r.success).count() as f64 / n,
        mean_reward: records.iter().map(EpisodeRecord::total_reward).sum::<f64>() / n,
        mean_length: records.iter().map(|r| r.length as f64).sum::<f64>() / n,
        collisions: records.iter().flat_map(|r| r.collisions.values()).sum(),
        records,
    })
}
