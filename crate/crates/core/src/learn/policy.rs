//! Softmax policies, the likelihood-ratio policy gradient and an n-step
//! advantage actor-critic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{softmax, Mlp};
use super::q::argmax;
use super::replay::{ParameterVector, Transition};
use super::LearnError;

/// π(a | o) = softmax(f_θ(o))_a for a one-hidden-layer network f.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub net: Mlp,
    pub theta: ParameterVector,
}

impl Policy {
    pub fn new(input: usize, hidden: usize, n_actions: usize, rng: &mut impl Rng) -> Self {
        let net = Mlp::new(input, hidden, n_actions);
        Self { theta: ParameterVector::new(net.init(rng)), net }
    }

    pub fn n_actions(&self) -> usize {
        self.net.output
    }

    pub fn probs_with(&self, theta: &[f64], obs: &[f64]) -> Vec<f64> {
        softmax(&self.net.forward(theta, obs).1)
    }

    pub fn probs(&self, obs: &[f64]) -> Vec<f64> {
        self.probs_with(&self.theta.values, obs)
    }

    /// Inverse-CDF sample from one uniform draw.
    pub fn sample(&self, obs: &[f64], rng: &mut impl Rng) -> usize {
        let p = self.probs(obs);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, pa) in p.iter().enumerate() {
            acc += pa;
            if u < acc {
                return a;
            }
        }
        p.len() - 1
    }

    pub fn greedy(&self, obs: &[f64]) -> usize {
        argmax(&self.probs(obs))
    }

    /// Adds `weight * ∇ log π(a|o)` into `grad`.
    pub fn add_log_prob_grad(&self, obs: &[f64], action: usize, weight: f64, grad: &mut [f64]) {
        let (h, logits) = self.net.forward(&self.theta.values, obs);
        let p = softmax(&logits);
        let dy: Vec<f64> =
            p.iter().enumerate().map(|(k, pk)| weight * (if k == action { 1.0 } else { 0.0 } - pk)).collect();
        self.net.backward(&self.theta.values, obs, &h, &dy, grad);
    }

    /// Adds `weight * ∇ H(π(·|o))` into `grad`.
    pub fn add_entropy_grad(&self, obs: &[f64], weight: f64, grad: &mut [f64]) {
        let (h, logits) = self.net.forward(&self.theta.values, obs);
        let p = softmax(&logits);
        let ent: f64 = -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>();
        let dy: Vec<f64> = p.iter().map(|pk| if *pk > 0.0 { -weight * pk * (pk.ln() + ent) } else { 0.0 }).collect();
        self.net.backward(&self.theta.values, obs, &h, &dy, grad);
    }
}

/// G_t = Σ_k γ^k r_{t+k} for every t of one trajectory.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut g = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        g[t] = acc;
    }
    g
}

fn weighted_steps(trajectories: &[Vec<Transition>], gamma: f64, baseline: bool) -> Vec<(&Transition, f64)> {
    let mut steps = Vec::new();
    for traj in trajectories {
        let rewards: Vec<f64> = traj.iter().map(|t| t.reward).collect();
        for (t, g) in traj.iter().zip(discounted_returns(&rewards, gamma)) {
            steps.push((t, g));
        }
    }
    if baseline && !steps.is_empty() {
        let b = steps.iter().map(|s| s.1).sum::<f64>() / steps.len() as f64;
        for s in &mut steps {
            s.1 -= b;
        }
    }
    steps
}

/// Surrogate whose gradient is the policy gradient:
/// `1/M Σ_traj Σ_t (G_t − b) log π_θ(a_t | o_t)`, with returns held fixed.
pub fn pg_surrogate(
    policy: &Policy,
    theta: &[f64],
    trajectories: &[Vec<Transition>],
    gamma: f64,
    baseline: bool,
) -> f64 {
    let m = trajectories.len() as f64;
    weighted_steps(trajectories, gamma, baseline)
        .into_iter()
        .map(|(t, w)| w * policy.probs_with(theta, &t.obs)[t.action].ln())
        .sum::<f64>()
        / m
}

/// Likelihood-ratio estimate of ∇_θ J, averaged over trajectories.
pub fn pg_gradient(policy: &Policy, trajectories: &[Vec<Transition>], gamma: f64, baseline: bool) -> Vec<f64> {
    let m = trajectories.len() as f64;
    let mut g = vec![0.0; policy.theta.len()];
    for (t, w) in weighted_steps(trajectories, gamma, baseline) {
        if w != 0.0 {
            policy.add_log_prob_grad(&t.obs, t.action, w / m, &mut g);
        }
    }
    g
}

/// One ascent step along [`pg_gradient`].
pub fn pg_update(
    policy: &mut Policy,
    trajectories: &[Vec<Transition>],
    gamma: f64,
    lr: f64,
    baseline: bool,
) -> Result<(), LearnError> {
    if trajectories.iter().all(|t| t.is_empty()) {
        return Err(LearnError::EmptyTrajectory);
    }
    let g = pg_gradient(policy, trajectories, gamma, baseline);
    policy.theta.update(|theta| {
        for (p, gi) in theta.iter_mut().zip(&g) {
            *p += lr * gi;
        }
    });
    Ok(())
}

/// Policy plus a state-value critic of the same shape with one output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorCritic {
    pub policy: Policy,
    pub critic: Mlp,
    pub critic_theta: ParameterVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcParams {
    pub gamma: f64,
    pub lr: f64,
    pub critic_lr: f64,
    pub n_step: usize,
    pub entropy: f64,
}

impl ActorCritic {
    pub fn new(input: usize, hidden: usize, n_actions: usize, rng: &mut impl Rng) -> Self {
        let policy = Policy::new(input, hidden, n_actions, rng);
        let critic = Mlp::new(input, hidden, 1);
        Self { critic_theta: ParameterVector::new(critic.init(rng)), policy, critic }
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.critic.forward(&self.critic_theta.values, obs).1[0]
    }
}

/// n-step targets: `R_t = Σ_{k<m} γ^k r_{t+k} + γ^m V(o_{t+m})`, where the
/// window stops early at a terminal step (no bootstrap) or at the segment
/// end (bootstrap from the last next-observation).
pub fn n_step_returns(ac: &ActorCritic, segment: &[Transition], gamma: f64, n: usize) -> Vec<f64> {
    let len = segment.len();
    let n = n.max(1);
    (0..len)
        .map(|t| {
            let mut ret = 0.0;
            let mut disc = 1.0;
            let mut k = t;
            loop {
                ret += disc * segment[k].reward;
                disc *= gamma;
                if segment[k].done {
                    break ret;
                }
                if k + 1 == len || k + 1 - t == n {
                    break ret + disc * ac.value(&segment[k].next_obs);
                }
                k += 1;
            }
        })
        .collect()
}

/// One actor and one critic step over on-policy segments. Returns the mean
/// squared advantage.
pub fn ac_update(ac: &mut ActorCritic, segments: &[Vec<Transition>], p: &AcParams) -> Result<f64, LearnError> {
    let total: usize = segments.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(LearnError::EmptyTrajectory);
    }
    let scale = 1.0 / total as f64;
    let mut g_pi = vec![0.0; ac.policy.theta.len()];
    let mut g_v = vec![0.0; ac.critic_theta.len()];
    let mut sq = 0.0;
    for seg in segments {
        let targets = n_step_returns(ac, seg, p.gamma, p.n_step);
        for (t, ret) in seg.iter().zip(targets) {
            let (h, v) = ac.critic.forward(&ac.critic_theta.values, &t.obs);
            let adv = ret - v[0];
            sq += adv * adv;
            ac.policy.add_log_prob_grad(&t.obs, t.action, adv * scale, &mut g_pi);
            if p.entropy != 0.0 {
                ac.policy.add_entropy_grad(&t.obs, p.entropy * scale, &mut g_pi);
            }
            // descent on ½(R − V)² is ascent along (R − V)∇V
            ac.critic.backward(&ac.critic_theta.values, &t.obs, &h, &[adv * scale], &mut g_v);
        }
    }
    ac.policy.theta.update(|th| th.iter_mut().zip(&g_pi).for_each(|(w, g)| *w += p.lr * g));
    ac.critic_theta.update(|th| th.iter_mut().zip(&g_v).for_each(|(w, g)| *w += p.critic_lr * g));
    Ok(sq * scale)
}
