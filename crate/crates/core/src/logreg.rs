//! Document-level binary logistic regression.
//!
//! Objective: `Σ_i BCE(y_i, σ(w·x_i + b)) + ‖w‖² / (2C)`; the intercept is
//! not regularized.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lbfgs::{self, LbfgsConfig};
use crate::model::{Label, ObservationSequence};
use crate::numeric::dot;

/// Inverse regularization strengths searched by the baseline.
pub const C_GRID: [f64; 5] = [0.1, 0.5, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Inverse regularization strength the model was fitted with.
    pub c: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_data(x: &[Vec<f64>], labels: &[Label]) -> Result<usize> {
    if x.is_empty() {
        return Err(invalid!("no training documents"));
    }
    if x.len() != labels.len() {
        return Err(invalid!("{} vectors but {} labels", x.len(), labels.len()));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
        return Err(invalid!("document vectors must share one dimension and be finite"));
    }
    if labels.iter().any(|l| l.0 > 1) {
        return Err(invalid!("logistic regression is binary; got a label above 1"));
    }
    Ok(dim)
}

/// Objective and gradient at `params = (w, b)`.
pub fn objective_and_gradient(x: &[Vec<f64>], labels: &[Label], params: &[f64], c: f64) -> Result<(f64, Vec<f64>)> {
    let dim = check_data(x, labels)?;
    if params.len() != dim + 1 {
        return Err(invalid!("expected {} parameters, got {}", dim + 1, params.len()));
    }
    if !(c > 0.0) {
        return Err(invalid!("C must be positive, got {c}"));
    }
    let (w, b) = params.split_at(dim);
    let mut value = dot(w, w) / (2.0 * c);
    let mut grad: Vec<f64> = w.iter().map(|v| v / c).chain([0.0]).collect();
    for (xi, yi) in x.iter().zip(labels) {
        let z = dot(w, xi) + b[0];
        let y = yi.0 as f64;
        value += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, v) in grad.iter_mut().zip(xi) {
            *g += r * v;
        }
        grad[dim] += r;
    }
    Ok((value, grad))
}

/// Fits the model from a small random start drawn from `seed`. Single-class
/// data is rejected.
pub fn train_logreg(x: &[Vec<f64>], labels: &[Label], c: f64, seed: u64) -> Result<LogRegModel> {
    let dim = check_data(x, labels)?;
    if !labels.contains(&Label::NEGATIVE) || !labels.contains(&Label::POSITIVE) {
        return Err(invalid!("logistic regression needs examples of both classes"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid!("C must be positive and finite, got {c}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<f64> = (0..=dim).map(|_| rng.gen_range(-0.01..=0.01)).collect();
    let cfg = LbfgsConfig {
        max_iterations: 2000,
        grad_tolerance: 1e-8,
        ..LbfgsConfig::default()
    };
    let m = lbfgs::minimize(|p| objective_and_gradient(x, labels, p, c), x0, &cfg)?;
    let mut weights = m.x;
    let intercept = weights.pop().unwrap_or(0.0);
    Ok(LogRegModel { weights, intercept, c })
}

impl LogRegModel {
    /// Probability of the positive label.
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(invalid!("vector has dimension {}, model expects {}", x.len(), self.weights.len()));
        }
        Ok(sigmoid(dot(&self.weights, x) + self.intercept))
    }

    /// Positive only when the probability strictly exceeds 0.5.
    pub fn predict(&self, x: &[f64]) -> Result<(Label, f64)> {
        let p = self.probability(x)?;
        Ok((if p > 0.5 { Label::POSITIVE } else { Label::NEGATIVE }, p))
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<(Label, f64)>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

/// Per-dimension mean of a sequence's vectors.
pub fn aggregate_document_vector(seq: &ObservationSequence) -> Vec<f64> {
    let n = seq.len() as f64;
    let mut out = vec![0.0; seq.dim()];
    for item in seq.items() {
        for (o, v) in out.iter_mut().zip(item) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= n;
    }
    out
}
