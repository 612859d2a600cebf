//! Experience tuples, the replay ring and versioned parameter vectors.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pomg::{AgentId, Observation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub agent: AgentId,
    pub obs: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Observation,
    /// Terminal: the target does not bootstrap from `next_obs`.
    pub done: bool,
}

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    next: usize,
    /// Whether this buffer collects every agent's experience.
    pub shared: bool,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, shared: bool) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: Vec::with_capacity(capacity.min(1 << 16)), capacity, next: 0, shared }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends `t`, evicting the oldest item when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Items from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Up to `n` distinct items chosen uniformly.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        index::sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect()
    }

    /// Like [`sample`](Self::sample) but returns the chosen indices.
    pub fn sample_indices(&self, n: usize, rng: &mut impl Rng) -> Vec<usize> {
        let n = n.min(self.items.len());
        index::sample(rng, self.items.len(), n).into_vec()
    }
}

/// Flat parameters with a version that increases on every update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub values: Vec<f64>,
    pub version: u64,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, version: 0 }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Applies `f` to the values and bumps the version.
    pub fn update(&mut self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.values);
        self.version += 1;
    }
}
