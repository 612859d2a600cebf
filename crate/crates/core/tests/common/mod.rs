//! Independent oracles and generators shared by the integration tests. None
//! of this calls into the code under test except to read plain data.
#![allow(dead_code)]

use rand::Rng;

pub const TABLE_NAMES: [&str; 4] = [
    "HomoNcomIndePOIntrxMASS3CTwn3-v0",
    "HeteCommIndePOIntrxMAEnv-v0",
    "HeteCommCoopPOUrbanMAEnv-v0",
    "HomoNcomIndeFOHiwaySynchMAEnv-v0",
];

const AGENT: [&str; 2] = ["Hete", "Homo"];
const COMM: [&str; 2] = ["Comm", "Ncom"];
const TASK: [&str; 4] = ["Inde", "Coop", "Comp", "Mixd"];
const OBS: [&str; 2] = ["PO", "FO"];
const MAP: [&str; 8] = ["Bridg", "Freew", "Hiway", "Intrx", "Intst", "Rural", "Tunnl", "Urban"];
const FLAGS: [&str; 4] = ["Advrs", "Async", "Mgoal", "Synch"];
const MULT: [&str; 2] = ["MA", "SA"];
const USID_CHARS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

/// A grammar-valid name in canonical form, built straight from the token
/// tables.
pub fn random_env_id(rng: &mut impl Rng) -> String {
    let mut s = String::new();
    s.push_str(AGENT[rng.random_range(0..AGENT.len())]);
    s.push_str(COMM[rng.random_range(0..COMM.len())]);
    s.push_str(TASK[rng.random_range(0..TASK.len())]);
    s.push_str(OBS[rng.random_range(0..OBS.len())]);
    s.push_str(MAP[rng.random_range(0..MAP.len())]);
    for f in FLAGS {
        if rng.random_bool(0.3) {
            s.push_str(f);
        }
    }
    s.push_str(MULT[rng.random_range(0..MULT.len())]);
    let len = rng.random_range(1..12);
    for _ in 0..len {
        s.push(USID_CHARS[rng.random_range(0..USID_CHARS.len())] as char);
    }
    s.push_str("-v");
    s.push_str(&rng.random_range(0u64..1000).to_string());
    s
}

/// Plain value iteration on an MDP given as `next[s][a]`, `reward[s][a]`.
pub fn value_iteration_oracle(next: &[Vec<usize>], reward: &[Vec<f64>], terminal: &[bool], gamma: f64) -> Vec<f64> {
    let n = next.len();
    let mut v = vec![0.0; n];
    for _ in 0..10_000 {
        let mut nv = vec![0.0; n];
        for s in 0..n {
            if terminal[s] {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..next[s].len() {
                best = best.max(reward[s][a] + gamma * v[next[s][a]]);
            }
            nv[s] = best;
        }
        let diff = v.iter().zip(&nv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = nv;
        if diff < 1e-14 {
            break;
        }
    }
    v
}

/// Expected payoff of each own action against the opponent mix, by
/// enumeration; returns (best value, best action with lowest-index ties).
pub fn enumerate_best_response(payoff: &[[f64; 2]; 2], opponent: [f64; 2]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (a, row) in payoff.iter().enumerate() {
        let ev: f64 = row.iter().zip(opponent).map(|(r, p)| p * r).sum();
        if ev > best.0 {
            best = (ev, a);
        }
    }
    best
}

/// Central differences of `f` at `x`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe);
        probe[i] = orig - h;
        let down = f(&probe);
        probe[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

/// Largest relative error, with an absolute floor to ignore near-zero entries.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6)).fold(0.0, f64::max)
}

/// Sutherland–Hodgman clip of a convex polygon against an axis-aligned box,
/// followed by the shoelace area.
pub fn clipped_area(poly: &[(f64, f64)], min: (f64, f64), max: (f64, f64)) -> f64 {
    let mut pts = poly.to_vec();
    let edges: [(usize, f64, bool); 4] = [(0, min.0, true), (0, max.0, false), (1, min.1, true), (1, max.1, false)];
    for (axis, bound, keep_greater) in edges {
        let inside = |p: &(f64, f64)| {
            let c = if axis == 0 { p.0 } else { p.1 };
            if keep_greater {
                c >= bound
            } else {
                c <= bound
            }
        };
        let mut out = Vec::new();
        for i in 0..pts.len() {
            let cur = pts[i];
            let prev = pts[(i + pts.len() - 1) % pts.len()];
            let cross = |a: (f64, f64), b: (f64, f64)| {
                let (ca, cb) = if axis == 0 { (a.0, b.0) } else { (a.1, b.1) };
                let t = (bound - ca) / (cb - ca);
                (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
            };
            match (inside(&prev), inside(&cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(cross(prev, cur)),
                (false, true) => {
                    out.push(cross(prev, cur));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
        pts = out;
        if pts.is_empty() {
            return 0.0;
        }
    }
    let n = pts.len();
    (0..n).map(|i| pts[i].0 * pts[(i + 1) % n].1 - pts[(i + 1) % n].0 * pts[i].1).sum::<f64>().abs() * 0.5
}

/// Rectangle corners from center, heading, length and width.
pub fn rect_corners(cx: f64, cy: f64, heading: f64, length: f64, width: f64) -> Vec<(f64, f64)> {
    let (c, s) = (heading.cos(), heading.sin());
    let (hl, hw) = (length / 2.0, width / 2.0);
    [(hl, -hw), (hl, hw), (-hl, hw), (-hl, -hw)]
        .iter()
        .map(|&(u, v)| (cx + u * c - v * s, cy + u * s + v * c))
        .collect()
}

/// Integrates the kinematic bicycle ODE with RK4 at a fine step, constant
/// controls, no speed clamping (callers keep below the limit).
pub fn bicycle_rk4(
    state: (f64, f64, f64, f64),
    accel: f64,
    delta: f64,
    wheelbase: f64,
    t: f64,
    substeps: usize,
) -> (f64, f64, f64, f64) {
    let f = |s: (f64, f64, f64, f64)| {
        let (_, _, th, v) = s;
        (v * th.cos(), v * th.sin(), v / wheelbase * delta.tan(), accel)
    };
    let h = t / substeps as f64;
    let mut s = state;
    let add = |s: (f64, f64, f64, f64), k: (f64, f64, f64, f64), w: f64| {
        (s.0 + w * k.0, s.1 + w * k.1, s.2 + w * k.2, s.3 + w * k.3)
    };
    for _ in 0..substeps {
        let k1 = f(s);
        let k2 = f(add(s, k1, h / 2.0));
        let k3 = f(add(s, k2, h / 2.0));
        let k4 = f(add(s, k3, h));
        s = (
            s.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            s.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            s.2 + h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
            s.3 + h / 6.0 * (k1.3 + 2.0 * k2.3 + 2.0 * k3.3 + k4.3),
        );
    }
    s
}

/// Two-sided binomial bound: `k` within `z` standard deviations of `n p`.
pub fn within_binomial(k: usize, n: usize, p: f64, z: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (k as f64 - mean).abs() <= z * sd
}
