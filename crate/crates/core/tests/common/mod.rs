//! Test-only oracles, independent of the library's inference code.
#![allow(dead_code)]

use hcrf_opinion::{HcrfParameters, ObservationSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub x: ObservationSequence,
    pub theta: HcrfParameters,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_sequence(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> ObservationSequence {
    let items = (0..len)
        .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    ObservationSequence::new("rand", items).unwrap()
}

pub fn random_parameters(rng: &mut ChaCha8Rng, hidden: usize, labels: usize, dim: usize, scale: f64) -> HcrfParameters {
    let n = HcrfParameters::parameter_count(hidden, labels, dim);
    let w = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    HcrfParameters::from_flat(hidden, labels, dim, w).unwrap()
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_len: usize, max_hidden: usize, max_dim: usize) -> Instance {
    let len = rng.gen_range(1..=max_len);
    let hidden = rng.gen_range(1..=max_hidden);
    let dim = rng.gen_range(1..=max_dim);
    let x = random_sequence(rng, len, dim);
    let theta = random_parameters(rng, hidden, 2, dim, 1.5);
    Instance { x, theta }
}

/// Unnormalized score written directly from the definition.
pub fn score(y: usize, path: &[usize], x: &ObservationSequence, theta: &HcrfParameters) -> f64 {
    let mut s = 0.0;
    for (j, &h) in path.iter().enumerate() {
        for (d, v) in x.items()[j].iter().enumerate() {
            s += v * theta.observation(h)[d];
        }
        s += theta.state(y, h);
        if j + 1 < path.len() {
            s += theta.transition(y, h, path[j + 1]);
        }
    }
    s
}

pub fn all_paths(len: usize, hidden: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..hidden).map(move |h| {
                    let mut q = p.clone();
                    q.push(h);
                    q
                })
            })
            .collect();
    }
    out
}

/// Per-label `log Σ_h exp score` by plain enumeration (max-shifted).
pub fn enumerated_log_partitions(x: &ObservationSequence, theta: &HcrfParameters) -> Vec<f64> {
    let paths = all_paths(x.len(), theta.num_hidden_states());
    (0..theta.num_labels())
        .map(|y| {
            let scores: Vec<f64> = paths.iter().map(|p| score(y, p, x, theta)).collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
        })
        .collect()
}

pub fn enumerated_posterior(x: &ObservationSequence, theta: &HcrfParameters) -> Vec<f64> {
    let lz = enumerated_log_partitions(x, theta);
    let m = lz.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = lz.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// `(state, pair)` marginals given `y` by enumeration.
pub fn enumerated_marginals(y: usize, x: &ObservationSequence, theta: &HcrfParameters) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let hs = theta.num_hidden_states();
    let len = x.len();
    let paths = all_paths(len, hs);
    let scores: Vec<f64> = paths.iter().map(|p| score(y, p, x, theta)).collect();
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut state = vec![vec![0.0; hs]; len];
    let mut pair = vec![vec![0.0; hs * hs]; len.saturating_sub(1)];
    for (p, w) in paths.iter().zip(&weights) {
        for j in 0..len {
            state[j][p[j]] += w / total;
            if j + 1 < len {
                pair[j][p[j] * hs + p[j + 1]] += w / total;
            }
        }
    }
    (state, pair)
}

/// Central finite difference of `f` along every coordinate.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, at: &[f64], step: f64) -> Vec<f64> {
    let mut w = at.to_vec();
    (0..at.len())
        .map(|i| {
            let orig = w[i];
            w[i] = orig + step;
            let up = f(&w);
            w[i] = orig - step;
            let down = f(&w);
            w[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, 1)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
