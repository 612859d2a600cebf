//! Best responses in small two-player stochastic games by value iteration.

use serde::{Deserialize, Serialize};

use super::LearnError;

/// `(next state, probability)` pairs.
pub type Successors = Vec<(usize, f64)>;

/// A finite game from agent i's point of view. `b` indexes the joint action
/// of all other agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticGame {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_other_actions: usize,
    /// `transitions[s][a][b]` lists `(s', probability)`.
    pub transitions: Vec<Vec<Vec<Successors>>>,
    /// `rewards[s][a][b]`: agent i's expected immediate reward.
    pub rewards: Vec<Vec<Vec<f64>>>,
    /// Absorbing states with value 0.
    pub terminal: Vec<bool>,
}

impl StochasticGame {
    /// One-shot matrix game: state 0 moves to the absorbing state 1.
    pub fn matrix(payoff: &[Vec<f64>]) -> Self {
        let n_a = payoff.len();
        let n_b = payoff[0].len();
        Self {
            n_states: 2,
            n_actions: n_a,
            n_other_actions: n_b,
            transitions: vec![vec![vec![vec![(1, 1.0)]; n_b]; n_a], vec![vec![vec![(1, 1.0)]; n_b]; n_a]],
            rewards: vec![payoff.to_vec(), vec![vec![0.0; n_b]; n_a]],
            terminal: vec![false, true],
        }
    }

    /// A single-agent MDP (the other side has one action).
    pub fn mdp(transitions: Vec<Vec<Successors>>, rewards: Vec<Vec<f64>>, terminal: Vec<bool>) -> Self {
        let n_states = transitions.len();
        let n_actions = transitions.first().map_or(0, Vec::len);
        Self {
            n_states,
            n_actions,
            n_other_actions: 1,
            transitions: transitions.into_iter().map(|s| s.into_iter().map(|a| vec![a]).collect()).collect(),
            rewards: rewards.into_iter().map(|s| s.into_iter().map(|r| vec![r]).collect()).collect(),
            terminal,
        }
    }

    fn validate(&self, opponent: &[Vec<f64>]) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::BadConfig(m.to_string()));
        if self.transitions.len() != self.n_states
            || self.rewards.len() != self.n_states
            || self.terminal.len() != self.n_states
        {
            return bad("game tables must have one row per state");
        }
        if opponent.len() != self.n_states || opponent.iter().any(|p| p.len() != self.n_other_actions) {
            return bad("opponent policy must give one distribution per state");
        }
        if opponent.iter().any(|p| (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 || p.iter().any(|x| *x < 0.0)) {
            return bad("opponent policy rows must be distributions");
        }
        Ok(())
    }

    /// Expected backup value of action `a` in state `s` given `v`.
    pub fn action_value(&self, s: usize, a: usize, opponent: &[Vec<f64>], v: &[f64], gamma: f64) -> f64 {
        (0..self.n_other_actions)
            .map(|b| {
                let pb = opponent[s][b];
                if pb == 0.0 {
                    return 0.0;
                }
                let future: f64 = self.transitions[s][a][b].iter().map(|&(s2, p)| p * v[s2]).sum();
                pb * (self.rewards[s][a][b] + gamma * future)
            })
            .sum()
    }
}

/// Value and greedy policy of a best response.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub values: Vec<f64>,
    /// Action per state; ties go to the lowest index.
    pub policy: Vec<usize>,
    pub iterations: usize,
}

/// Iterates `V(s) ← max_a Σ_b π₋ᵢ(b|s) [r(s,a,b) + γ Σ_s' P(s'|s,a,b) V(s')]`
/// until the sup-norm change drops below `tol`.
pub fn best_response_value_iteration(
    game: &StochasticGame,
    opponent: &[Vec<f64>],
    gamma: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<BestResponse, LearnError> {
    game.validate(opponent)?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(LearnError::BadConfig(format!("gamma {gamma} outside [0, 1)")));
    }
    let mut v = vec![0.0; game.n_states];
    for it in 1..=max_iterations {
        let mut next = vec![0.0; game.n_states];
        let mut delta: f64 = 0.0;
        for s in 0..game.n_states {
            if !game.terminal[s] {
                next[s] = (0..game.n_actions)
                    .map(|a| game.action_value(s, a, opponent, &v, gamma))
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            delta = delta.max((next[s] - v[s]).abs());
        }
        v = next;
        if delta < tol {
            let policy = (0..game.n_states)
                .map(|s| {
                    let q: Vec<f64> =
                        (0..game.n_actions).map(|a| game.action_value(s, a, opponent, &v, gamma)).collect();
                    super::q::argmax(&q)
                })
                .collect();
            return Ok(BestResponse { values: v, policy, iterations: it });
        }
    }
    Err(LearnError::NoConvergence(max_iterations))
}
