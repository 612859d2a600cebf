//! Action-value functions, TD targets and the squared-error update.
//!
//! The loss on a batch `B` is `1/(2|B|) Σ (y − Q(o, a; θ))²` with
//! `y = r + γ max_a' Q(o', a'; θ⁻)` held fixed. With the ½ factor a tabular
//! step of size 1 on a single transition lands exactly on the target.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::replay::{ParameterVector, Transition};
use super::LearnError;

/// Uniform per-dimension binning; dimensions with one bin are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    /// `(low, high, bins)` per observation entry.
    pub dims: Vec<(f64, f64, usize)>,
}

impl Discretizer {
    pub fn new(dims: Vec<(f64, f64, usize)>) -> Self {
        Self { dims }
    }

    pub fn num_states(&self) -> usize {
        self.dims.iter().map(|d| d.2.max(1)).product()
    }

    pub fn index(&self, obs: &[f64]) -> usize {
        let mut idx = 0;
        for (&(lo, hi, bins), &x) in self.dims.iter().zip(obs) {
            let bins = bins.max(1);
            let cell = if bins == 1 || hi <= lo {
                0
            } else {
                let t = ((x - lo) / (hi - lo) * bins as f64).floor();
                if t.is_nan() {
                    0
                } else {
                    (t.max(0.0) as usize).min(bins - 1)
                }
            };
            idx = idx * bins + cell;
        }
        idx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QModel {
    Tabular(Discretizer),
    Mlp(Mlp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    pub model: QModel,
    pub n_actions: usize,
    pub theta: ParameterVector,
    /// Target parameters θ⁻.
    pub target: Vec<f64>,
    /// Copy θ into θ⁻ after this many updates.
    pub sync_interval: u64,
}

impl QFunction {
    pub fn tabular(disc: Discretizer, n_actions: usize, sync_interval: u64) -> Self {
        let n = disc.num_states() * n_actions;
        Self {
            model: QModel::Tabular(disc),
            n_actions,
            theta: ParameterVector::new(vec![0.0; n]),
            target: vec![0.0; n],
            sync_interval: sync_interval.max(1),
        }
    }

    pub fn mlp(input: usize, hidden: usize, n_actions: usize, sync_interval: u64, rng: &mut impl Rng) -> Self {
        let net = Mlp::new(input, hidden, n_actions);
        let p = net.init(rng);
        Self {
            model: QModel::Mlp(net),
            n_actions,
            target: p.clone(),
            theta: ParameterVector::new(p),
            sync_interval: sync_interval.max(1),
        }
    }

    fn eval(&self, params: &[f64], obs: &[f64]) -> Vec<f64> {
        match &self.model {
            QModel::Tabular(d) => {
                let s = d.index(obs) * self.n_actions;
                params[s..s + self.n_actions].to_vec()
            }
            QModel::Mlp(net) => net.forward(params, obs).1,
        }
    }

    /// Q(o, ·; θ).
    pub fn values(&self, obs: &[f64]) -> Vec<f64> {
        self.eval(&self.theta.values, obs)
    }

    /// Q(o, ·; θ⁻). With a sync interval of 1, θ⁻ always equals θ and θ is
    /// read directly.
    pub fn target_values(&self, obs: &[f64]) -> Vec<f64> {
        if self.sync_interval == 1 {
            self.eval(&self.theta.values, obs)
        } else {
            self.eval(&self.target, obs)
        }
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.theta.values);
    }
}

/// Lowest index among the maxima.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn td_target(q: &QFunction, t: &Transition, gamma: f64) -> f64 {
    if t.done || gamma == 0.0 {
        return t.reward;
    }
    let next = q.target_values(&t.next_obs);
    t.reward + gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Half mean squared TD error of `batch` under parameters `theta`.
pub fn q_loss(q: &QFunction, theta: &[f64], batch: &[&Transition], gamma: f64) -> f64 {
    let n = batch.len() as f64;
    batch
        .iter()
        .map(|t| {
            let y = td_target(q, t, gamma);
            let e = y - q.eval(theta, &t.obs)[t.action];
            0.5 * e * e
        })
        .sum::<f64>()
        / n
}

/// Gradient of [`q_loss`] with respect to θ.
pub fn q_loss_gradient(q: &QFunction, batch: &[&Transition], gamma: f64) -> Vec<f64> {
    let theta = &q.theta.values;
    let mut g = vec![0.0; theta.len()];
    let n = batch.len() as f64;
    for t in batch {
        let y = td_target(q, t, gamma);
        match &q.model {
            QModel::Tabular(d) => {
                let i = d.index(&t.obs) * q.n_actions + t.action;
                g[i] -= (y - theta[i]) / n;
            }
            QModel::Mlp(net) => {
                let (h, out) = net.forward(theta, &t.obs);
                let mut dy = vec![0.0; q.n_actions];
                dy[t.action] = -(y - out[t.action]) / n;
                net.backward(theta, &t.obs, &h, &dy, &mut g);
            }
        }
    }
    g
}

/// One descent step on the batch loss. Syncs θ⁻ every `sync_interval`
/// versions.
pub fn q_update(q: &mut QFunction, batch: &[&Transition], gamma: f64, lr: f64) -> Result<(), LearnError> {
    if batch.is_empty() {
        return Err(LearnError::EmptyBatch);
    }
    if let QModel::Tabular(d) = &q.model {
        // sparse form of the dense gradient step
        let n = batch.len() as f64;
        let mut deltas: Vec<(usize, f64)> = Vec::with_capacity(batch.len());
        for t in batch {
            let i = d.index(&t.obs) * q.n_actions + t.action;
            let e = td_target(q, t, gamma) - q.theta.values[i];
            deltas.push((i, lr * e / n));
        }
        q.theta.update(|theta| {
            for (i, dv) in deltas {
                theta[i] += dv;
            }
        });
    } else {
        let g = q_loss_gradient(q, batch, gamma);
        q.theta.update(|theta| {
            for (p, gi) in theta.iter_mut().zip(&g) {
                *p -= lr * gi;
            }
        });
    }
    if q.sync_interval > 1 && q.theta.version.is_multiple_of(q.sync_interval) {
        q.sync_target();
    }
    Ok(())
}

/// Uniform action with probability `epsilon`, else the greedy one. Always
/// consumes one uniform draw, plus one more when exploring.
pub fn act_epsilon_greedy(q: &QFunction, obs: &[f64], epsilon: f64, rng: &mut impl Rng) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..q.n_actions)
    } else {
        argmax(&q.values(obs))
    }
}
