//! One-hidden-layer perceptron over a flat parameter slice.
//!
//! Layout: `W1 (hidden × input)`, `b1 (hidden)`, `W2 (output × hidden)`,
//! `b2 (output)`. The hidden activation is tanh; the output is linear.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl Mlp {
    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        Self { input, hidden, output }
    }

    pub fn num_params(&self) -> usize {
        self.hidden * self.input + self.hidden + self.output * self.hidden + self.output
    }

    /// Length of the hidden-layer block (`W1` and `b1`), which comes first.
    pub fn hidden_block_len(&self) -> usize {
        self.hidden * self.input + self.hidden
    }

    /// Uniform fan-in initialisation; output layer starts at zero.
    pub fn init(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.num_params()];
        let bound = 1.0 / (self.input.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        for w in &mut p[..self.hidden * self.input] {
            *w = dist.sample(rng);
        }
        p
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let (w1, rest) = p.split_at(self.hidden * self.input);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.output * self.hidden);
        (w1, b1, w2, b2)
    }

    /// Returns `(hidden activations, outputs)`.
    pub fn forward(&self, p: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(x.len(), self.input);
        let (w1, b1, w2, b2) = self.split(p);
        let h: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &w1[j * self.input..(j + 1) * self.input];
                (b1[j] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()).tanh()
            })
            .collect();
        let y = (0..self.output)
            .map(|k| {
                let row = &w2[k * self.hidden..(k + 1) * self.hidden];
                b2[k] + row.iter().zip(&h).map(|(w, hj)| w * hj).sum::<f64>()
            })
            .collect();
        (h, y)
    }

    /// Adds `d(sum_k dy[k] * y[k]) / dp` into `grad`.
    pub fn backward(&self, p: &[f64], x: &[f64], h: &[f64], dy: &[f64], grad: &mut [f64]) {
        let (_, _, w2, _) = self.split(p);
        let n_w1 = self.hidden * self.input;
        let n_w2 = self.output * self.hidden;
        let (g_w1, rest) = grad.split_at_mut(n_w1);
        let (g_b1, rest) = rest.split_at_mut(self.hidden);
        let (g_w2, g_b2) = rest.split_at_mut(n_w2);
        let mut dh = vec![0.0; self.hidden];
        for k in 0..self.output {
            if dy[k] == 0.0 {
                continue;
            }
            g_b2[k] += dy[k];
            for j in 0..self.hidden {
                g_w2[k * self.hidden + j] += dy[k] * h[j];
                dh[j] += dy[k] * w2[k * self.hidden + j];
            }
        }
        for j in 0..self.hidden {
            let dz = dh[j] * (1.0 - h[j] * h[j]);
            if dz == 0.0 {
                continue;
            }
            g_b1[j] += dz;
            for (i, xi) in x.iter().enumerate() {
                g_w1[j * self.input + i] += dz * xi;
            }
        }
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
